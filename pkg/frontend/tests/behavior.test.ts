// @vitest-environment jsdom
import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { renderForm } from '../src/form';
import { parseWidgetTree, WidgetTree } from '../src/schema';

const tree: WidgetTree = parseWidgetTree(JSON.parse(
  readFileSync(join(__dirname, 'fixtures', 'bp.widget.json'), 'utf-8')));

function clickButton(text: string) {
  const button = Array.from(document.querySelectorAll('button'))
    .find((b) => b.textContent === text) as HTMLButtonElement;
  button.click();
}

describe('behavior rules', () => {
  it('help button shows the help window, close hides it again', () => {
    const form = renderForm(tree, document);
    document.body.textContent = '';
    document.body.appendChild(form.container);

    expect(form.isVisible('BPHelpFrame')).toBe(false);
    clickButton('Help');
    expect(form.isVisible('BPHelpFrame')).toBe(true);
    clickButton('Close');
    expect(form.isVisible('BPHelpFrame')).toBe(false);
  });

  it('open/close round-trips to the initial visibility state', () => {
    const form = renderForm(tree, document);
    document.body.textContent = '';
    document.body.appendChild(form.container);

    const initial = new Map(
      tree.roots.map((root) => [root.name, form.isVisible(root.name)]));
    clickButton('Help');
    clickButton('Close');
    for (const [name, visible] of initial) {
      expect(form.isVisible(name)).toBe(visible);
    }
  });

  it('unmatched events are ignored', () => {
    const form = renderForm(tree, document);
    expect(() => form.activate('NoSuchPart')).not.toThrow();
  });

  it('help text contains the profile help copy', () => {
    const form = renderForm(tree, document);
    document.body.textContent = '';
    document.body.appendChild(form.container);
    const area = document.querySelector('textarea');
    expect(area?.value).toContain('Blood Pressure');
  });
});

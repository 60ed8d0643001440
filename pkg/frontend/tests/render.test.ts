// @vitest-environment jsdom
import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { renderForm } from '../src/form';
import { parseWidgetTree, WidgetNode, WidgetTree } from '../src/schema';

const tree: WidgetTree = parseWidgetTree(JSON.parse(
  readFileSync(join(__dirname, 'fixtures', 'bp.widget.json'), 'utf-8')));

const SYS = '00215062000112sys';

function mount(t: WidgetTree) {
  const form = renderForm(t, document);
  document.body.textContent = '';
  document.body.appendChild(form.container);
  return form;
}

describe('renderForm on the blood-pressure document', () => {
  it('renders one entity fieldset with three labeled fields and a help button', () => {
    mount(tree);
    // entity panels are the fieldsets carrying a legend (the app shell and
    // help-frame panels are plain containers)
    const legends = document.querySelectorAll('fieldset.mf-panel > legend');
    expect(legends).toHaveLength(1);
    expect(legends[0].textContent).toBe('Blood Pressure');
    expect(document.querySelectorAll('input[data-value-id]')).toHaveLength(3);
    const labels = Array.from(document.querySelectorAll('.mf-field label'))
      .map((l) => l.textContent);
    expect(labels).toEqual(['time', 'systolic', 'diastolic']);
    const buttons = Array.from(document.querySelectorAll('button'))
      .map((b) => b.textContent);
    expect(buttons).toContain('Help');
    expect(buttons).toContain('Submit');
  });

  it('help window starts hidden, app window visible', () => {
    const form = mount(tree);
    expect(form.isVisible('AppFrame')).toBe(true);
    expect(form.isVisible('BPHelpFrame')).toBe(false);
  });

  it('typing updates state and collectValues skips empties', () => {
    const form = mount(tree);
    const input = document.querySelector<HTMLInputElement>(
      `input[data-value-id="${SYS}"]`)!;
    input.value = '12';
    input.dispatchEvent(new Event('input'));
    expect(form.state.get(SYS)).toBe('12');
    expect(form.collectValues()).toEqual({ [SYS]: '12' });
  });

  it('a type error disables submit; fixing it re-enables', () => {
    const form = mount(tree);
    const set = (id: string, value: string) => {
      const input = document.querySelector<HTMLInputElement>(
        `input[data-value-id="${id}"]`)!;
      input.value = value;
      input.dispatchEvent(new Event('input'));
    };
    set('00215062000112time', '08:00');
    set(SYS, 'abc');
    set('00215062000112dia', '8');
    const submit = Array.from(document.querySelectorAll('button'))
      .find((b) => b.textContent === 'Submit') as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    expect(form.canSubmit()).toBe(false);
    set(SYS, '12');
    expect(submit.disabled).toBe(false);
  });

  it('a bound breach shows a warning badge but keeps submit enabled', () => {
    const form = mount(tree);
    const set = (id: string, value: string) => {
      const input = document.querySelector<HTMLInputElement>(
        `input[data-value-id="${id}"]`)!;
      input.value = value;
      input.dispatchEvent(new Event('input'));
    };
    set('00215062000112time', '08:00');
    set(SYS, '24');
    set('00215062000112dia', '8');
    const badge = document.querySelector('.mf-issue.mf-warning');
    expect(badge?.textContent).toContain('24');
    expect(form.canSubmit()).toBe(true);
  });
});

describe('generic rendering', () => {
  function syntheticTree(inputCount: number): WidgetTree {
    const children: WidgetNode[] = [];
    for (let i = 0; i < inputCount; i += 1) {
      children.push({ role: 'label', name: `L${i}`, text: `field ${i}`,
        children: [], rules: [] });
      children.push({ role: 'text_input', name: `I${i}`, children: [], rules: [],
        input: { value_id: `v${i}`, datatype: 'integer' } });
    }
    children.push({ role: 'button', name: 'SubmitButton', text: 'Submit',
      children: [], rules: [] });
    return {
      version: 1,
      roots: [{ role: 'window', name: 'W', children, rules: [] }],
      triggers: [],
      relations: [],
    };
  }

  it('renders exactly n input controls for n bound values', () => {
    for (const n of [0, 1, 5, 17]) {
      const form = mount(syntheticTree(n));
      expect(document.querySelectorAll('input[data-value-id]')).toHaveLength(n);
      expect(form.state.size).toBe(n);
    }
  });
});

describe('trigger-gated fields', () => {
  const gatedTree: WidgetTree = {
    version: 1,
    roots: [{
      role: 'window', name: 'W', rules: [], children: [
        { role: 'label', name: 'LS', text: 'sys', children: [], rules: [] },
        { role: 'text_input', name: 'IS', children: [], rules: [],
          input: { value_id: 'sys', datatype: 'integer' } },
        { role: 'label', name: 'LP', text: 'pulse', children: [], rules: [] },
        { role: 'text_input', name: 'IP', children: [], rules: [],
          input: { value_id: 'pulse', datatype: 'integer' } },
        { role: 'button', name: 'SubmitButton', text: 'Submit', children: [], rules: [] },
      ],
    }],
    triggers: [{ value_id: 'sys', op: 'gt', literal: '20', show: ['pulse'] }],
    relations: [],
  };

  it('reveals the gated field live and clears it when hidden again', () => {
    const form = mount(gatedTree);
    const sysInput = document.querySelector<HTMLInputElement>('input[data-value-id="sys"]')!;
    const pulseRow = document.querySelector<HTMLInputElement>(
      'input[data-value-id="pulse"]')!.closest('.mf-field') as HTMLElement;
    expect(pulseRow.style.display).toBe('none');

    sysInput.value = '21';
    sysInput.dispatchEvent(new Event('input'));
    expect(pulseRow.style.display).toBe('');

    const pulseInput = document.querySelector<HTMLInputElement>(
      'input[data-value-id="pulse"]')!;
    pulseInput.value = '80';
    pulseInput.dispatchEvent(new Event('input'));
    expect(form.state.get('pulse')).toBe('80');

    sysInput.value = '10';
    sysInput.dispatchEvent(new Event('input'));
    expect(pulseRow.style.display).toBe('none');
    expect(form.state.get('pulse')).toBe(''); // hidden gated inputs hold empty state
  });
});

import { readFileSync } from 'node:fs';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { collectInputs, parseWidgetTree, SchemaError } from '../src/schema';

const fixture = JSON.parse(
  readFileSync(join(__dirname, 'fixtures', 'bp.widget.json'), 'utf-8'));

describe('parseWidgetTree', () => {
  it('accepts the compiled blood-pressure document', () => {
    const tree = parseWidgetTree(fixture);
    expect(tree.roots).toHaveLength(2); // app window + one help window
    expect(collectInputs(tree).map((i) => i.value_id)).toEqual([
      '00215062000112time', '00215062000112sys', '00215062000112dia']);
  });

  it('exposes bounds on the systolic input', () => {
    const tree = parseWidgetTree(fixture);
    const sys = collectInputs(tree).find((i) => i.value_id.endsWith('sys'));
    expect(sys?.datatype).toBe('integer');
    expect(sys?.max).toBe(23);
    expect(sys?.min).toBeUndefined();
  });

  it('rejects an unknown role', () => {
    const tampered = JSON.parse(JSON.stringify(fixture));
    tampered.roots[0].role = 'tree_view';
    expect(() => parseWidgetTree(tampered)).toThrow(SchemaError);
  });

  it('rejects a non-window root', () => {
    const tampered = JSON.parse(JSON.stringify(fixture));
    tampered.roots[0].role = 'panel';
    expect(() => parseWidgetTree(tampered)).toThrow(SchemaError);
  });

  it('rejects structurally broken documents', () => {
    expect(() => parseWidgetTree(null)).toThrow(SchemaError);
    expect(() => parseWidgetTree({})).toThrow(SchemaError);
    expect(() => parseWidgetTree({ version: 1, roots: [{}], triggers: [], relations: [] }))
      .toThrow(SchemaError);
  });
});

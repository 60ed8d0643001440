/**
 * Client-side mirror of the server validation rules: same typed grammar,
 * same inclusive bound semantics, same relation operators. The server
 * stays authoritative; the mirror only decides what blocks the submit
 * button (type errors, missing required, relation violations) and what
 * merely warns (bound breaches are real data the doctor must see).
 */

import type { Datatype, InputDescriptor, Op, WidgetTree } from './schema';
import { collectInputs } from './schema';

const INTEGER_RE = /^[+-]?[0-9]+$/;
const DECIMAL_RE = /^[+-]?[0-9]+(\.[0-9]+)?$/;
const TIME_RE = /^([01][0-9]|2[0-3]):[0-5][0-9]$/;

export type Parsed =
  | { ok: true; value: number | string | boolean }
  | { ok: false };

export function parseTyped(raw: string, datatype: Datatype): Parsed {
  const text = raw.trim();
  switch (datatype) {
    case 'integer':
      return INTEGER_RE.test(text) ? { ok: true, value: Number(text) } : { ok: false };
    case 'decimal':
      return DECIMAL_RE.test(text) ? { ok: true, value: Number(text) } : { ok: false };
    case 'time':
      return TIME_RE.test(text) ? { ok: true, value: text } : { ok: false };
    case 'boolean':
      if (text === 'true') return { ok: true, value: true };
      if (text === 'false') return { ok: true, value: false };
      return { ok: false };
    case 'char':
      return { ok: true, value: text };
  }
}

export function compare(op: Op, left: number | string | boolean, right: number | string | boolean): boolean {
  switch (op) {
    case 'lt': return left < right;
    case 'le': return left <= right;
    case 'gt': return left > right;
    case 'ge': return left >= right;
    case 'eq': return left === right;
    case 'ne': return left !== right;
  }
}

export interface FieldIssue {
  valueId: string;
  severity: 'error' | 'warning';
  code: 'TYPE_ERROR' | 'MISSING_REQUIRED' | 'RELATION_VIOLATION' | 'BOUND_MIN' | 'BOUND_MAX';
  message: string;
}

function boundValue(bound: number | string, datatype: Datatype): number | string {
  // time bounds arrive as "HH:MM" strings and compare lexicographically
  return datatype === 'time' ? String(bound) : Number(bound);
}

export function checkBounds(value: number | string | boolean,
                            input: InputDescriptor): FieldIssue[] {
  if (input.datatype === 'char' || input.datatype === 'boolean') return [];
  const issues: FieldIssue[] = [];
  if (input.min !== undefined && compare('lt', value, boundValue(input.min, input.datatype))) {
    issues.push({
      valueId: input.value_id, severity: 'warning', code: 'BOUND_MIN',
      message: `${value} is below the minimum ${input.min}`,
    });
  }
  if (input.max !== undefined && compare('gt', value, boundValue(input.max, input.datatype))) {
    issues.push({
      valueId: input.value_id, severity: 'warning', code: 'BOUND_MAX',
      message: `${value} is above the maximum ${input.max}`,
    });
  }
  return issues;
}

/** Value ids required right now: every non-gated input plus fired triggers. */
export function requiredIds(tree: WidgetTree, raw: Map<string, string>): Set<string> {
  const inputs = collectInputs(tree);
  const byId = new Map(inputs.map((i) => [i.value_id, i]));
  const gated = new Set<string>();
  for (const trigger of tree.triggers) {
    for (const id of trigger.show) gated.add(id);
  }
  const required = new Set(inputs.map((i) => i.value_id).filter((id) => !gated.has(id)));
  for (const trigger of tree.triggers) {
    const input = byId.get(trigger.value_id);
    const entered = raw.get(trigger.value_id);
    if (!input || entered === undefined || entered === '') continue;
    const parsed = parseTyped(entered, input.datatype);
    if (!parsed.ok) continue;
    const literal = parseTyped(trigger.literal, input.datatype);
    if (!literal.ok) continue;
    if (compare(trigger.op, parsed.value, literal.value)) {
      for (const id of trigger.show) required.add(id);
    }
  }
  return required;
}

/**
 * Validate the whole form state. Blocking errors are exactly the cases
 * the server would reject (client blockers are a subset of server
 * rejections); bound breaches stay submittable warnings.
 */
export function validateForm(tree: WidgetTree, raw: Map<string, string>): FieldIssue[] {
  const issues: FieldIssue[] = [];
  const inputs = collectInputs(tree);
  const parsed = new Map<string, number | string | boolean>();

  for (const input of inputs) {
    const text = raw.get(input.value_id);
    if (text === undefined || text === '') continue;
    const result = parseTyped(text, input.datatype);
    if (!result.ok) {
      issues.push({
        valueId: input.value_id, severity: 'error', code: 'TYPE_ERROR',
        message: `not a valid ${input.datatype}`,
      });
      continue;
    }
    parsed.set(input.value_id, result.value);
    issues.push(...checkBounds(result.value, input));
  }

  const required = requiredIds(tree, raw);
  for (const input of inputs) {
    const text = raw.get(input.value_id);
    if (required.has(input.value_id) && (text === undefined || text === '')) {
      issues.push({
        valueId: input.value_id, severity: 'error', code: 'MISSING_REQUIRED',
        message: 'required',
      });
    }
  }

  for (const relation of tree.relations) {
    const left = parsed.get(relation.left);
    const right = parsed.get(relation.right);
    if (left === undefined || right === undefined) continue; // only when all operands filled
    if (!compare(relation.op, left, right)) {
      issues.push({
        valueId: relation.left, severity: 'error', code: 'RELATION_VIOLATION',
        message: `must be ${relation.op} ${relation.right}`,
      });
    }
  }
  return issues;
}

export function hasBlockers(issues: FieldIssue[]): boolean {
  return issues.some((issue) => issue.severity === 'error');
}

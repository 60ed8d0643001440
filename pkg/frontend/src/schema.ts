/**
 * Widget-tree wire format (docs/widget-tree.md) with strict structural
 * validation. The console refuses to render anything that does not parse:
 * no partial renders from tampered or skewed documents.
 */

export type Role = 'window' | 'panel' | 'label' | 'text_input' | 'text_area' | 'button';

export type Datatype = 'integer' | 'decimal' | 'char' | 'boolean' | 'time';

export type Op = 'lt' | 'le' | 'gt' | 'ge' | 'eq' | 'ne';

export interface InputDescriptor {
  value_id: string;
  datatype: Datatype;
  min?: number | string;
  max?: number | string;
}

export interface RuleAction {
  property: string;
  target: string;
  value: string;
}

export interface Rule {
  event: string;
  actions: RuleAction[];
}

export interface WidgetNode {
  role: Role;
  name: string;
  children: WidgetNode[];
  text?: string;
  visible?: boolean;
  input?: InputDescriptor;
  rules: Rule[];
}

export interface Trigger {
  value_id: string;
  op: Op;
  literal: string;
  show: string[];
}

export interface Relation {
  op: Op;
  left: string;
  right: string;
}

export interface WidgetTree {
  version: number;
  roots: WidgetNode[];
  triggers: Trigger[];
  relations: Relation[];
}

export class SchemaError extends Error {
  constructor(public path: string, message: string) {
    super(`${path}: ${message}`);
    this.name = 'SchemaError';
  }
}

const ROLES: readonly string[] = ['window', 'panel', 'label', 'text_input', 'text_area', 'button'];
const DATATYPES: readonly string[] = ['integer', 'decimal', 'char', 'boolean', 'time'];
const OPS: readonly string[] = ['lt', 'le', 'gt', 'ge', 'eq', 'ne'];

function isObject(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null && !Array.isArray(value);
}

function need<T>(cond: boolean, path: string, message: string): asserts cond {
  if (!cond) throw new SchemaError(path, message);
}

function parseNode(data: unknown, path: string): WidgetNode {
  need(isObject(data), path, 'node must be an object');
  need(typeof data.role === 'string' && ROLES.includes(data.role), path,
    `unknown role ${JSON.stringify(data.role)}`);
  need(typeof data.name === 'string' && data.name.length > 0, path, 'node needs a name');
  need(Array.isArray(data.children), path, 'children must be an array');
  need(Array.isArray(data.rules), path, 'rules must be an array');

  const node: WidgetNode = {
    role: data.role as Role,
    name: data.name,
    children: (data.children as unknown[]).map((c, i) => parseNode(c, `${path}.children[${i}]`)),
    rules: (data.rules as unknown[]).map((r, i) => parseRule(r, `${path}.rules[${i}]`)),
  };
  if (data.text !== undefined) {
    need(typeof data.text === 'string', path, 'text must be a string');
    node.text = data.text;
  }
  if (data.visible !== undefined) {
    need(typeof data.visible === 'boolean', path, 'visible must be a boolean');
    node.visible = data.visible;
  }
  if (data.input !== undefined) {
    node.input = parseInput(data.input, `${path}.input`);
    need(node.role === 'text_input', path, 'only text_input nodes carry an input descriptor');
  }
  return node;
}

function parseInput(data: unknown, path: string): InputDescriptor {
  need(isObject(data), path, 'input must be an object');
  need(typeof data.value_id === 'string', path, 'input needs a value_id');
  need(typeof data.datatype === 'string' && DATATYPES.includes(data.datatype), path,
    `unknown datatype ${JSON.stringify(data.datatype)}`);
  const input: InputDescriptor = {
    value_id: data.value_id,
    datatype: data.datatype as Datatype,
  };
  for (const bound of ['min', 'max'] as const) {
    const value: unknown = data[bound];
    if (value !== undefined) {
      need(typeof value === 'number' || typeof value === 'string', path,
        `${bound} must be a number or string`);
      input[bound] = value;
    }
  }
  return input;
}

function parseRule(data: unknown, path: string): Rule {
  need(isObject(data), path, 'rule must be an object');
  need(typeof data.event === 'string', path, 'rule needs an event');
  need(Array.isArray(data.actions), path, 'rule needs actions');
  return {
    event: data.event,
    actions: (data.actions as unknown[]).map((a, i) => {
      const actionPath = `${path}.actions[${i}]`;
      need(isObject(a), actionPath, 'action must be an object');
      need(typeof a.property === 'string' && typeof a.target === 'string'
        && typeof a.value === 'string', actionPath, 'action needs property/target/value');
      return { property: a.property, target: a.target, value: a.value };
    }),
  };
}

export function parseWidgetTree(data: unknown): WidgetTree {
  need(isObject(data), '$', 'document must be an object');
  need(typeof data.version === 'number', '$', 'missing version');
  need(Array.isArray(data.roots), '$', 'missing roots');
  need(Array.isArray(data.triggers), '$', 'missing triggers');
  need(Array.isArray(data.relations), '$', 'missing relations');

  const tree: WidgetTree = {
    version: data.version,
    roots: (data.roots as unknown[]).map((r, i) => parseNode(r, `$.roots[${i}]`)),
    triggers: (data.triggers as unknown[]).map((t, i) => {
      const path = `$.triggers[${i}]`;
      need(isObject(t), path, 'trigger must be an object');
      need(typeof t.value_id === 'string' && typeof t.literal === 'string', path,
        'trigger needs value_id and literal');
      need(typeof t.op === 'string' && OPS.includes(t.op), path,
        `unknown op ${JSON.stringify(t.op)}`);
      need(Array.isArray(t.show) && t.show.every((s) => typeof s === 'string'), path,
        'trigger show must be string[]');
      return { value_id: t.value_id, op: t.op as Op, literal: t.literal, show: t.show as string[] };
    }),
    relations: (data.relations as unknown[]).map((r, i) => {
      const path = `$.relations[${i}]`;
      need(isObject(r), path, 'relation must be an object');
      need(typeof r.op === 'string' && OPS.includes(r.op), path,
        `unknown op ${JSON.stringify(r.op)}`);
      need(typeof r.left === 'string' && typeof r.right === 'string', path,
        'relation needs left and right');
      return { op: r.op as Op, left: r.left, right: r.right };
    }),
  };
  for (const root of tree.roots) {
    need(root.role === 'window', '$.roots', 'every root must be a window');
  }
  return tree;
}

/** All input descriptors in document order. */
export function collectInputs(tree: WidgetTree): InputDescriptor[] {
  const out: InputDescriptor[] = [];
  const walk = (node: WidgetNode) => {
    if (node.input) out.push(node.input);
    node.children.forEach(walk);
  };
  tree.roots.forEach(walk);
  return out;
}

/**
 * Generic widget-tree renderer. The console knows nothing about entities:
 * it maps roles to native controls, wires behavior rules to their source
 * nodes, hides trigger-gated fields until their condition holds, and
 * mirrors the server validation while the patient types. The only fixed
 * name it knows is "SubmitButton", part of the wire contract.
 */

import type { WidgetNode, WidgetTree } from './schema';
import { collectInputs } from './schema';
import { FieldIssue, hasBlockers, requiredIds, validateForm } from './validate';

export const SUBMIT_BUTTON = 'SubmitButton';

export interface RenderedForm {
  container: HTMLElement;
  tree: WidgetTree;
  /** raw entry per value id; hidden gated inputs always hold '' */
  state: Map<string, string>;
  issues: FieldIssue[];
  /** click/activate a named part, running its behavior rules */
  activate(partName: string): void;
  isVisible(partName: string): boolean;
  setVisible(partName: string, visible: boolean): void;
  /** non-empty raw values, the submission "values" object */
  collectValues(): Record<string, string>;
  /** write values back into matching inputs (409 replay after refetch) */
  restoreValues(values: Record<string, string>): void;
  canSubmit(): boolean;
  refresh(): void;
}

export interface RenderOptions {
  onSubmit?: (form: RenderedForm) => void;
}

export function renderForm(tree: WidgetTree, doc: Document,
                           options: RenderOptions = {}): RenderedForm {
  const container = doc.createElement('div');
  container.className = 'mf-console';

  const windows = new Map<string, HTMLElement>();
  const inputs = new Map<string, HTMLInputElement>();
  const issueSlots = new Map<string, HTMLElement>();
  const fieldRows = new Map<string, HTMLElement>();
  const nodesByName = new Map<string, WidgetNode>();
  const state = new Map<string, string>();
  for (const descriptor of collectInputs(tree)) {
    state.set(descriptor.value_id, '');
  }
  const gated = new Set<string>();
  for (const trigger of tree.triggers) {
    for (const id of trigger.show) gated.add(id);
  }

  let submitButton: HTMLButtonElement | null = null;

  const form: RenderedForm = {
    container,
    tree,
    state,
    issues: [],
    activate(partName: string): void {
      const node = nodesByName.get(partName);
      if (!node) return;
      for (const rule of node.rules) {
        if (rule.event !== 'actionPerformed') continue;
        for (const action of rule.actions) {
          if (action.property === 'visible') {
            form.setVisible(action.target, action.value === 'true');
          }
        }
      }
      if (partName === SUBMIT_BUTTON && node.rules.length === 0) {
        if (form.canSubmit() && options.onSubmit) options.onSubmit(form);
      }
    },
    isVisible(partName: string): boolean {
      const element = windows.get(partName) ?? fieldRows.get(partName);
      return element !== undefined && element.style.display !== 'none';
    },
    setVisible(partName: string, visible: boolean): void {
      const element = windows.get(partName);
      if (element) element.style.display = visible ? '' : 'none';
    },
    collectValues(): Record<string, string> {
      const values: Record<string, string> = {};
      for (const [id, raw] of state) {
        if (raw !== '') values[id] = raw;
      }
      return values;
    },
    restoreValues(values: Record<string, string>): void {
      for (const [id, raw] of Object.entries(values)) {
        const input = inputs.get(id);
        if (input) {
          input.value = raw;
          state.set(id, raw);
        }
      }
      form.refresh();
    },
    canSubmit(): boolean {
      return !hasBlockers(form.issues);
    },
    refresh(): void {
      const required = requiredIds(tree, state);
      for (const id of gated) {
        const row = fieldRows.get(id);
        if (!row) continue;
        const show = required.has(id);
        if (!show && row.style.display !== 'none') {
          // hidden gated inputs hold empty state
          state.set(id, '');
          const input = inputs.get(id);
          if (input) input.value = '';
        }
        row.style.display = show ? '' : 'none';
      }
      form.issues = validateForm(tree, state);
      for (const [id, slot] of issueSlots) {
        const fieldIssues = form.issues.filter((issue) => issue.valueId === id);
        slot.textContent = fieldIssues.map((issue) => issue.message).join('; ');
        slot.className = 'mf-issue';
        if (fieldIssues.some((issue) => issue.severity === 'error')) {
          slot.classList.add('mf-error');
        } else if (fieldIssues.length > 0) {
          slot.classList.add('mf-warning');
        }
      }
      if (submitButton) submitButton.disabled = !form.canSubmit();
    },
  };

  function renderChildren(node: WidgetNode, parent: HTMLElement): void {
    const children = node.children;
    for (let i = 0; i < children.length; i += 1) {
      const child = children[i];
      // a label directly before an input renders as one field row
      if (child.role === 'label' && children[i + 1]?.input) {
        const inputNode = children[i + 1];
        parent.appendChild(renderFieldRow(child, inputNode));
        i += 1;
        continue;
      }
      if (child.input) {
        parent.appendChild(renderFieldRow(null, child));
        continue;
      }
      parent.appendChild(renderNode(child));
    }
  }

  function renderFieldRow(labelNode: WidgetNode | null, inputNode: WidgetNode): HTMLElement {
    const descriptor = inputNode.input!;
    nodesByName.set(inputNode.name, inputNode);
    const row = doc.createElement('div');
    row.className = 'mf-field';
    const label = doc.createElement('label');
    label.textContent = labelNode?.text ?? descriptor.value_id;
    row.appendChild(label);
    const input = doc.createElement('input');
    input.type = 'text';
    input.dataset.valueId = descriptor.value_id;
    input.dataset.name = inputNode.name;
    input.addEventListener('input', () => {
      state.set(descriptor.value_id, input.value);
      form.refresh();
    });
    label.appendChild(input);
    const slot = doc.createElement('span');
    slot.className = 'mf-issue';
    row.appendChild(slot);
    inputs.set(descriptor.value_id, input);
    issueSlots.set(descriptor.value_id, slot);
    fieldRows.set(descriptor.value_id, row);
    fieldRows.set(inputNode.name, row);
    if (gated.has(descriptor.value_id)) row.style.display = 'none';
    return row;
  }

  function renderNode(node: WidgetNode): HTMLElement {
    nodesByName.set(node.name, node);
    let element: HTMLElement;
    switch (node.role) {
      case 'window': {
        element = doc.createElement('section');
        element.className = 'mf-window';
        if (node.text) {
          const title = doc.createElement('h2');
          title.textContent = node.text;
          element.appendChild(title);
        }
        if (node.visible === false) element.style.display = 'none';
        renderChildren(node, element);
        break;
      }
      case 'panel': {
        const fieldset = doc.createElement('fieldset');
        fieldset.className = 'mf-panel';
        if (node.text) {
          const legend = doc.createElement('legend');
          legend.textContent = node.text;
          fieldset.appendChild(legend);
        }
        renderChildren(node, fieldset);
        element = fieldset;
        break;
      }
      case 'label': {
        element = doc.createElement('span');
        element.className = 'mf-label';
        element.textContent = node.text ?? '';
        break;
      }
      case 'text_area': {
        const area = doc.createElement('textarea');
        area.readOnly = true;
        area.value = node.text ?? '';
        element = area;
        break;
      }
      case 'button': {
        const button = doc.createElement('button');
        button.type = 'button';
        button.textContent = node.text ?? node.name;
        button.addEventListener('click', () => form.activate(node.name));
        if (node.name === SUBMIT_BUTTON) submitButton = button as HTMLButtonElement;
        element = button;
        break;
      }
      case 'text_input': {
        // reached only for inputs outside panels; same row treatment
        return renderFieldRow(null, node);
      }
    }
    element.dataset.name = node.name;
    return element;
  }

  for (const root of tree.roots) {
    const rendered = renderNode(root);
    windows.set(root.name, rendered);
    container.appendChild(rendered);
  }
  form.refresh();
  return form;
}

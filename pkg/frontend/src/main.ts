/**
 * Application shell: login, fetch the compiled interface, mount the
 * generic form, submit entered data, and surface the server's outcome
 * (including alerts for out-of-range readings). On profile version skew
 * the console refetches the interface and replays entered values; on
 * network failure entered data stays put behind a retry button.
 */

import { freshNonce, GatewayClient, Period, SubmitResult } from './api';
import { renderForm, RenderedForm } from './form';
import { SchemaError } from './schema';

const PERIODS: Period[] = ['morning', 'noon', 'evening', 'night'];

interface ConsoleState {
  client: GatewayClient;
  patientId: string;
  form: RenderedForm | null;
  version: number;
  nonce: string;
  submitting: boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, text?: string, className?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (text) node.textContent = text;
  if (className) node.className = className;
  return node;
}

export function mountConsole(root: HTMLElement, baseUrl: string,
                             fetchImpl: typeof fetch = fetch.bind(globalThis)): void {
  const doc = root.ownerDocument;
  const state: ConsoleState = {
    client: new GatewayClient(baseUrl, fetchImpl),
    patientId: '',
    form: null,
    version: 0,
    nonce: freshNonce(),
    submitting: false,
  };

  const loginView = el(doc, 'div', undefined, 'mf-login');
  const status = el(doc, 'p', '', 'mf-status');
  const formHost = el(doc, 'div', undefined, 'mf-form-host');
  const periodSelect = el(doc, 'select');
  periodSelect.className = 'mf-period';
  for (const period of PERIODS) {
    const option = el(doc, 'option', period);
    option.value = period;
    periodSelect.appendChild(option);
  }

  const patientField = el(doc, 'input');
  patientField.placeholder = 'patient id';
  const passwordField = el(doc, 'input');
  passwordField.type = 'password';
  passwordField.placeholder = 'password';
  const loginButton = el(doc, 'button', 'Log in');
  loginView.append(patientField, passwordField, loginButton);
  root.append(loginView, status, formHost);

  loginButton.addEventListener('click', async () => {
    status.textContent = '';
    try {
      await state.client.login(patientField.value, passwordField.value);
      state.patientId = patientField.value;
      loginView.style.display = 'none';
      await loadInterface();
    } catch (error) {
      status.textContent = error instanceof Error ? error.message : 'login failed';
    }
  });

  async function loadInterface(previous?: Record<string, string>): Promise<void> {
    try {
      const tree = await state.client.fetchWidgetTree(state.patientId);
      state.version = tree.version;
      formHost.textContent = '';
      const periodRow = el(doc, 'div', undefined, 'mf-period-row');
      periodRow.append(el(doc, 'span', 'Period: '), periodSelect);
      formHost.appendChild(periodRow);
      state.form = renderForm(tree, doc, { onSubmit: submit });
      formHost.appendChild(state.form.container);
      if (previous) state.form.restoreValues(previous);
    } catch (error) {
      if (error instanceof SchemaError) {
        // never partially render a document that fails the schema
        formHost.textContent = '';
        formHost.appendChild(el(doc, 'div',
          `The interface document is invalid: ${error.message}`, 'mf-fatal'));
      } else {
        status.textContent = error instanceof Error ? error.message : 'failed to load';
      }
    }
  }

  async function submit(form: RenderedForm): Promise<void> {
    if (state.submitting) return; // one in-flight submission at a time
    state.submitting = true;
    status.textContent = 'Submitting…';
    const values = form.collectValues();
    let result: SubmitResult;
    try {
      result = await state.client.submit(
        state.patientId, periodSelect.value as Period, values,
        state.version, state.nonce);
    } catch {
      state.submitting = false;
      status.textContent = 'Could not reach the server; your entries are kept.';
      const retry = el(doc, 'button', 'Retry', 'mf-retry');
      retry.addEventListener('click', () => {
        retry.remove();
        void submit(form);
      });
      status.appendChild(retry);
      return;
    }
    state.submitting = false;
    renderOutcome(result, values, form);
  }

  function renderOutcome(result: SubmitResult, values: Record<string, string>,
                         form: RenderedForm): void {
    status.textContent = '';
    switch (result.kind) {
      case 'accepted': {
        status.appendChild(el(doc, 'span',
          `Submission accepted (record ${result.recordId}).`, 'mf-accepted'));
        for (const alert of result.alerts) {
          status.appendChild(el(doc, 'div',
            `Alert sent to your doctor: ${alert.message}`, 'mf-alert'));
        }
        state.nonce = freshNonce(); // next submission is a new event
        break;
      }
      case 'rejected': {
        status.appendChild(el(doc, 'span', 'The server rejected this entry.',
          'mf-rejected'));
        for (const rejection of result.rejections) {
          status.appendChild(el(doc, 'div',
            `${rejection.subject}: ${rejection.message}`, 'mf-rejection'));
        }
        break;
      }
      case 'version_skew': {
        status.appendChild(el(doc, 'span',
          'Your form was out of date; it has been refreshed with your entries.',
          'mf-skew'));
        void loadInterface(values);
        break;
      }
      case 'error': {
        status.appendChild(el(doc, 'span',
          `Request failed (${result.status}): ${result.detail}`, 'mf-rejected'));
        break;
      }
    }
  }
}

declare global {
  interface Window {
    MEDFORGE_BASE_URL?: string;
  }
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mountConsole(document.getElementById('app')!,
    window.MEDFORGE_BASE_URL ?? window.location.origin);
}

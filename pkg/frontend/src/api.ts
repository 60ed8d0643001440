/**
 * Gateway client: login, widget-tree fetch, submission. One in-flight
 * submission at a time is the caller's job; this module only shapes
 * requests and classifies responses.
 */

import { parseWidgetTree, WidgetTree } from './schema';

export type Period = 'morning' | 'noon' | 'evening' | 'night';

export interface AlertInfo {
  alert_id: number;
  value_id: string;
  kind: string;
  message: string;
}

export interface RejectionInfo {
  subject: string;
  code: string;
  message: string;
}

export type SubmitResult =
  | { kind: 'accepted'; recordId: number; alerts: AlertInfo[] }
  | { kind: 'rejected'; rejections: RejectionInfo[] }
  | { kind: 'version_skew'; currentVersion: number }
  | { kind: 'error'; status: number; detail: string };

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
    this.name = 'ApiError';
  }
}

export class GatewayClient {
  private token: string | null = null;

  constructor(public baseUrl: string,
              private fetchImpl: typeof fetch = fetch.bind(globalThis)) {}

  async login(principal: string, password: string): Promise<void> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/login`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ principal, password }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, 'login failed');
    }
    const body = await response.json();
    this.token = body.token;
  }

  private headers(): Record<string, string> {
    if (!this.token) throw new ApiError(401, 'not logged in');
    return {
      Authorization: `Bearer ${this.token}`,
      'Content-Type': 'application/json',
    };
  }

  async fetchWidgetTree(patientId: string): Promise<WidgetTree> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/patients/${encodeURIComponent(patientId)}/ui?format=widget-json`,
      { headers: this.headers() });
    if (!response.ok) {
      throw new ApiError(response.status, `could not fetch the interface (${response.status})`);
    }
    return parseWidgetTree(await response.json());
  }

  async submit(patientId: string, period: Period, values: Record<string, string>,
               profileVersion: number, nonce: string): Promise<SubmitResult> {
    const body = {
      patient_id: patientId,
      period,
      client_timestamp: new Date().toISOString(),
      values,
      submission_nonce: nonce,
      profile_version: profileVersion,
    };
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/patients/${encodeURIComponent(patientId)}/submissions`,
      { method: 'POST', headers: this.headers(), body: JSON.stringify(body) });
    const payload = await response.json().catch(() => ({}));
    if (response.status === 200) {
      return { kind: 'accepted', recordId: payload.record_id, alerts: payload.alerts ?? [] };
    }
    if (response.status === 422) {
      return { kind: 'rejected', rejections: payload.rejections ?? [] };
    }
    if (response.status === 409) {
      return { kind: 'version_skew', currentVersion: payload.current_version ?? 0 };
    }
    return { kind: 'error', status: response.status, detail: payload.detail ?? 'request failed' };
  }
}

export function freshNonce(): string {
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, '0')).join('');
}

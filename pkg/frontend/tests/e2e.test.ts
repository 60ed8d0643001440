// @vitest-environment jsdom
/**
 * End-to-end: spawns the real Python gateway and drives the console
 * against it over HTTP. Also checks client/server validation agreement
 * on a shared corpus: client blockers are a subset of server rejections,
 * and client-clean entries are never rejected for type/relation reasons.
 */
import { execFileSync, spawn, ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { GatewayClient } from '../src/api';
import { mountConsole } from '../src/main';
import { validateForm, hasBlockers } from '../src/validate';

const REPO_ROOT = join(__dirname, '..', '..');
const PROFILE = join(REPO_ROOT, 'tests', 'fixtures', 'bp_profile.xml');

const TIME = '00215062000112time';
const SYS = '00215062000112sys';
const DIA = '00215062000112dia';

let server: ChildProcess;
let baseUrl: string;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.listen(0, '127.0.0.1', () => {
      const port = (probe.address() as { port: number }).port;
      probe.close(() => resolve(port));
    });
    probe.on('error', reject);
  });
}

async function until(cond: () => boolean | Promise<boolean>, ms = 15000): Promise<void> {
  const deadline = Date.now() + ms;
  for (;;) {
    if (await cond()) return;
    if (Date.now() > deadline) throw new Error('condition never became true');
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), 'medforge-e2e-'));
  execFileSync('python3', ['-m', 'medforge.cli', 'add-user',
    join(dataDir, 'credentials.txt'), 'p1', 'patient', '--password', 'pw']);
  execFileSync('python3', ['-c', `
import sys
sys.path.insert(0, ${JSON.stringify(join(REPO_ROOT, 'src'))})
from medforge.store import Store
from medforge.profile_xml import parse_profile
profile = parse_profile(open(${JSON.stringify(PROFILE)}).read())
Store(${JSON.stringify(dataDir)}).store_profile("p1", profile, expected_version=0)
`]);
  const port = await freePort();
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn('python3', ['-m', 'medforge.cli', 'serve',
    '--data', dataDir, '--port', String(port)], { stdio: 'ignore' });
  await until(async () => {
    try {
      const response = await fetch(`${baseUrl}/api/login`, {
        method: 'POST',
        body: JSON.stringify({ principal: 'p1', password: 'pw' }),
      });
      return response.status === 200;
    } catch {
      return false;
    }
  });
}, 30000);

afterAll(() => {
  server?.kill();
});

function setField(id: string, value: string) {
  const input = document.querySelector<HTMLInputElement>(
    `input[data-value-id="${id}"]`)!;
  input.value = value;
  input.dispatchEvent(new Event('input'));
}

describe('console against the live gateway', () => {
  it('logs in, renders 3 inputs, submits sys=24, and shows the alert', async () => {
    document.body.innerHTML = '<div id="root"></div>';
    mountConsole(document.getElementById('root')!, baseUrl);
    (document.querySelector('input[placeholder="patient id"]') as HTMLInputElement)
      .value = 'p1';
    (document.querySelector('input[placeholder="password"]') as HTMLInputElement)
      .value = 'pw';
    (Array.from(document.querySelectorAll('button'))
      .find((b) => b.textContent === 'Log in') as HTMLButtonElement).click();

    await until(() => document.querySelectorAll('input[data-value-id]').length === 3);

    setField(TIME, '08:00');
    setField(SYS, '24');
    setField(DIA, '8');
    const submit = Array.from(document.querySelectorAll('button'))
      .find((b) => b.textContent === 'Submit') as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    submit.click();

    await until(() => document.querySelector('.mf-alert') !== null);
    expect(document.querySelector('.mf-alert')?.textContent)
      .toContain('above max limit 23');
  }, 30000);
});

describe('client/server validation agreement', () => {
  const corpus: Array<Record<string, string>> = [
    { [TIME]: '08:00', [SYS]: '12', [DIA]: '8' },
    { [TIME]: '08:00', [SYS]: '24', [DIA]: '8' },     // bound warning only
    { [TIME]: '08:00', [SYS]: 'abc', [DIA]: '8' },    // type error
    { [TIME]: '25:00', [SYS]: '12', [DIA]: '8' },     // bad time
    { [TIME]: '08:00', [SYS]: '12', [DIA]: '15' },    // relation violation
    { [TIME]: '08:00', [SYS]: '12', [DIA]: '12' },    // lt is strict
    { [SYS]: '12', [DIA]: '8' },                       // missing time
    { [TIME]: '08:00', [SYS]: ' 12 ', [DIA]: '8' },   // whitespace ok
    { [TIME]: '08:00', [SYS]: '+3', [DIA]: '2' },
    { [TIME]: '08:00', [SYS]: '12.5', [DIA]: '8' },   // decimal into integer
  ];

  it('client blockers are a subset of server rejections', async () => {
    const client = new GatewayClient(baseUrl);
    await client.login('p1', 'pw');
    const tree = await client.fetchWidgetTree('p1');

    for (const values of corpus) {
      const issues = validateForm(tree, new Map(Object.entries(values)));
      const result = await client.submit('p1', 'noon', values, tree.version,
        Math.random().toString(16).slice(2));
      if (hasBlockers(issues)) {
        expect(result.kind).toBe('rejected');
      } else {
        expect(result.kind).toBe('accepted');
      }
      if (result.kind === 'rejected') {
        const serverCodes = new Set(result.rejections.map((r) => r.code));
        for (const issue of issues.filter((i) => i.severity === 'error')) {
          expect(serverCodes.has(issue.code)).toBe(true);
        }
        // never rejected for type/relation reasons when the client saw none
        if (!issues.some((i) => i.code === 'TYPE_ERROR')) {
          expect(serverCodes.has('TYPE_ERROR')).toBe(false);
        }
        if (!issues.some((i) => i.code === 'RELATION_VIOLATION')) {
          expect(serverCodes.has('RELATION_VIOLATION')).toBe(false);
        }
      }
    }
  }, 30000);
});

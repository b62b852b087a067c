// The console steering scenario: replay a stream of one activity while it is
// gray-listed (frames pass through), drag its chip from gray to black and
// save mid-stream, and watch subsequent frames come back replaced under the
// bumped policy version. Drives the real page wiring (DOM events, fetch,
// WebSocket) against the in-memory gateway double.

import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest'

import { main, setReplayFromText } from '../src/app'
import { FakeGateway, FakeSocket } from './fakeGateway'

const NAMES = ['walking', 'smoking', 'standing']

const PAGE = `
  <input id="gateway-url" value="http://fake" />
  <button id="connect"></button>
  <span id="stream-status"></span>
  <span id="policy-version"></span><span id="policy-dirty"></span>
  <div id="col-white"></div><div id="col-black"></div><div id="col-gray"></div>
  <ul id="policy-messages"></ul>
  <button id="policy-save"></button>
  <button id="policy-reload"></button>
  <input type="file" id="dataset-file" />
  <input id="window-length" value="4" />
  <button id="stream-start"></button>
  <button id="stream-stop"></button>
  <canvas id="chart-original"></canvas>
  <canvas id="chart-sanitized"></canvas>
  <span id="action-badge"></span>
  <span id="frame-counter"></span>
  <div id="topk"></div>
`

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms))
}

// Every row's first value is the class id so the fake gateway can "classify".
function csvFor(classId: number, rows: number): string {
  const lines = ['#classes: ' + NAMES.join(','), '#channels: 2']
  for (let t = 0; t < rows; t++) lines.push(`${classId},${classId},0.5`)
  return lines.join('\n')
}

describe('console steering', () => {
  let gateway: FakeGateway

  beforeEach(() => {
    document.body.innerHTML = PAGE
    gateway = new FakeGateway(NAMES, {
      white: ['walking'],
      black: [],
      gray: ['smoking', 'standing'],
      version: 1,
    })
    vi.stubGlobal('fetch', gateway.fetchFn)
    class BoundSocket extends FakeSocket {
      constructor(url: string) {
        super(url, gateway)
      }
    }
    vi.stubGlobal('WebSocket', BoundSocket)
  })

  afterEach(() => {
    vi.unstubAllGlobals()
  })

  it('passthrough before, replaced after moving the class to black mid-stream', async () => {
    main()
    document.getElementById('connect')!.dispatchEvent(new Event('click'))
    await sleep(20)
    expect(document.getElementById('policy-version')!.textContent).toBe('v1')

    // Replay the 'smoking' stream (currently gray-listed).
    setReplayFromText(csvFor(1, 12), 4)
    document.getElementById('stream-start')!.dispatchEvent(new Event('click'))
    await sleep(500)

    const before = gateway.served.length
    expect(before).toBeGreaterThanOrEqual(1)
    expect(gateway.served.every((r) => r.action === 'passthrough')).toBe(true)
    expect(document.getElementById('action-badge')!.textContent).toContain('passthrough')
    expect(document.getElementById('action-badge')!.textContent).toContain('v1')

    // Drag the chip from the gray column onto the black column and save.
    const chip = [...document.querySelectorAll('#col-gray .chip')].find(
      (node) => node.textContent === 'smoking',
    )!
    chip.dispatchEvent(new Event('dragstart'))
    document.getElementById('col-black')!.dispatchEvent(
      new Event('drop', { cancelable: true }),
    )
    const save = document.getElementById('policy-save') as HTMLButtonElement
    expect(save.disabled).toBe(false)
    save.dispatchEvent(new Event('click'))
    await sleep(20)
    expect(gateway.policy.version).toBe(2)
    expect(gateway.policy.black).toEqual(['smoking'])

    await sleep(500)
    document.getElementById('stream-stop')!.dispatchEvent(new Event('click'))

    const after = gateway.served.slice(before)
    expect(after.some((r) => r.action === 'replaced')).toBe(true)
    const replaced = after.filter((r) => r.action === 'replaced')
    expect(replaced.every((r) => r.policy_version === 2)).toBe(true)
    expect(replaced.every((r) => r.replacement === 'standing')).toBe(true)
    expect(document.getElementById('action-badge')!.textContent).toContain('replaced')
    expect(document.getElementById('action-badge')!.textContent).toContain('v2')
  })

  it('policy editor round-trip matches the stored canonical policy', async () => {
    main()
    document.getElementById('connect')!.dispatchEvent(new Event('click'))
    await sleep(20)

    const chip = [...document.querySelectorAll('#col-gray .chip')].find(
      (node) => node.textContent === 'smoking',
    )!
    chip.dispatchEvent(new Event('dragstart'))
    document.getElementById('col-black')!.dispatchEvent(
      new Event('drop', { cancelable: true }),
    )
    document.getElementById('policy-save')!.dispatchEvent(new Event('click'))
    await sleep(20)

    document.getElementById('policy-reload')!.dispatchEvent(new Event('click'))
    await sleep(20)
    const cols = {
      white: [...document.querySelectorAll('#col-white .chip')].map((n) => n.textContent),
      black: [...document.querySelectorAll('#col-black .chip')].map((n) => n.textContent),
      gray: [...document.querySelectorAll('#col-gray .chip')].map((n) => n.textContent),
    }
    expect(cols).toEqual({
      white: [...gateway.policy.white].sort(),
      black: [...gateway.policy.black].sort(),
      gray: [...gateway.policy.gray].sort(),
    })
    expect(document.getElementById('policy-version')!.textContent).toBe('v2')
    expect(document.getElementById('policy-dirty')!.textContent).toBe('')
  })
})

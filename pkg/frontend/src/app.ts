import { GatewayClient } from './api'
import { drawWindow } from './charts'
import { CATEGORIES, PolicyEditor } from './policyEditor'
import { parseDatasetCsv, ReplayWindow } from './replay'
import { StreamSession, StreamFrameView } from './stream'
import { CATEGORY_COLORS, topKBars } from './topk'
import type { Category, CategoryOrUnlisted, SanitizationResult } from './types'

const state = {
  client: null as GatewayClient | null,
  editor: new PolicyEditor(),
  categories: new Map<string, CategoryOrUnlisted>(),
  session: null as StreamSession | null,
  replay: [] as ReplayWindow[],
  replayTimer: 0,
  dragChip: null as string | null,
  frames: 0,
  replaced: 0,
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

async function refreshCategories(): Promise<void> {
  if (!state.client) return
  state.categories = new Map(
    (await state.client.activities()).map((a) => [a.name, a.category]),
  )
}

function renderPolicy(): void {
  for (const cat of CATEGORIES) {
    const list = el<HTMLDivElement>(`col-${cat}`)
    list.innerHTML = ''
    for (const chip of state.editor.lists[cat]) {
      const node = document.createElement('span')
      node.className = 'chip'
      node.textContent = chip
      node.draggable = true
      node.dataset.chip = chip
      node.addEventListener('dragstart', () => {
        state.dragChip = chip
      })
      // Click-to-cycle fallback for keyboards and tests.
      node.addEventListener('click', () => {
        const order: Category[] = ['white', 'black', 'gray']
        const next = order[(order.indexOf(cat) + 1) % order.length]
        state.editor.move(chip, next)
        renderPolicy()
      })
      list.appendChild(node)
    }
  }
  el<HTMLSpanElement>('policy-version').textContent = `v${state.editor.serverVersion}`
  el<HTMLSpanElement>('policy-dirty').textContent = state.editor.dirty ? 'unsaved edits' : ''
  const messages = el<HTMLUListElement>('policy-messages')
  messages.innerHTML = ''
  for (const msg of state.editor.validationMessages) {
    const li = document.createElement('li')
    li.textContent = msg
    messages.appendChild(li)
  }
  el<HTMLButtonElement>('policy-save').disabled = !state.editor.canSave()
}

function wireDropZones(): void {
  for (const cat of CATEGORIES) {
    const zone = el<HTMLDivElement>(`col-${cat}`)
    zone.addEventListener('dragover', (ev) => ev.preventDefault())
    zone.addEventListener('drop', (ev) => {
      ev.preventDefault()
      if (state.dragChip) {
        state.editor.move(state.dragChip, cat)
        state.dragChip = null
        renderPolicy()
      }
    })
  }
}

function renderTopK(result: SanitizationResult): void {
  const panel = el<HTMLDivElement>('topk')
  panel.innerHTML = ''
  for (const bar of topKBars(result.top_k, state.categories)) {
    const row = document.createElement('div')
    row.className = 'topk-row'
    const fill = document.createElement('div')
    fill.className = 'topk-fill'
    fill.style.width = `${bar.widthPct}%`
    fill.style.background = CATEGORY_COLORS[bar.category]
    const label = document.createElement('span')
    label.textContent = `${bar.name} ${bar.score.toFixed(3)}`
    row.appendChild(fill)
    row.appendChild(label)
    panel.appendChild(row)
  }
}

function onFrame(view: StreamFrameView): void {
  state.frames += 1
  if (view.result.action === 'replaced') state.replaced += 1
  drawWindow(el<HTMLCanvasElement>('chart-original'), view.original, '#5b8dd9')
  drawWindow(
    el<HTMLCanvasElement>('chart-sanitized'),
    view.result.window,
    view.result.action === 'replaced' ? '#e05555' : '#5b8dd9',
  )
  const badge = el<HTMLSpanElement>('action-badge')
  badge.textContent = `${view.result.action}${
    view.result.replacement ? ` -> ${view.result.replacement}` : ''
  } (policy v${view.result.policy_version})`
  badge.className = `badge ${view.result.action}`
  el<HTMLSpanElement>('frame-counter').textContent =
    `${state.frames} frames, ${state.replaced} replaced`
  renderTopK(view.result)
}

function startReplay(): void {
  if (!state.client || state.replay.length === 0) return
  stopReplay()
  state.session = new StreamSession(state.client.streamUrl(), {
    onFrame,
    onError: (seq, message) => {
      el<HTMLSpanElement>('stream-status').textContent = `frame ${seq}: ${message}`
    },
    onClose: () => {
      el<HTMLSpanElement>('stream-status').textContent = 'reconnecting...'
    },
  })
  state.session.connect()
  let i = 0
  state.replayTimer = window.setInterval(() => {
    if (!state.session) return
    try {
      state.session.send(state.replay[i % state.replay.length].window)
      i += 1
    } catch {
      // not connected yet; retry on the next tick
    }
  }, 150)
  el<HTMLSpanElement>('stream-status').textContent = 'streaming'
}

function stopReplay(): void {
  if (state.replayTimer) window.clearInterval(state.replayTimer)
  state.replayTimer = 0
  state.session?.close()
  state.session = null
}

async function connect(): Promise<void> {
  const base = el<HTMLInputElement>('gateway-url').value.replace(/\/$/, '')
  state.client = new GatewayClient(base)
  await state.editor.reload(state.client)
  await refreshCategories()
  renderPolicy()
  el<HTMLSpanElement>('stream-status').textContent = 'connected'
}

// Replay windows come from the file picker in the page; tests inject CSV text
// through this same path.
export function setReplayFromText(text: string, windowLength: number): void {
  state.replay = parseDatasetCsv(text, windowLength)
  el<HTMLSpanElement>('stream-status').textContent =
    `${state.replay.length} windows ready to replay`
}

export function main(): void {
  wireDropZones()
  el<HTMLButtonElement>('connect').addEventListener('click', () => {
    connect().catch((err) => {
      el<HTMLSpanElement>('stream-status').textContent = `connect failed: ${err.message}`
    })
  })
  el<HTMLButtonElement>('policy-save').addEventListener('click', async () => {
    if (!state.client) return
    await state.editor.save(state.client)
    await refreshCategories()
    renderPolicy()
  })
  el<HTMLButtonElement>('policy-reload').addEventListener('click', async () => {
    if (!state.client) return
    await state.editor.reload(state.client)
    await refreshCategories()
    renderPolicy()
  })
  el<HTMLInputElement>('dataset-file').addEventListener('change', async (ev) => {
    const input = ev.target as HTMLInputElement
    const file = input.files?.[0]
    if (!file) return
    const windowLength = parseInt(el<HTMLInputElement>('window-length').value, 10) || 32
    setReplayFromText(await file.text(), windowLength)
  })
  el<HTMLButtonElement>('stream-start').addEventListener('click', startReplay)
  el<HTMLButtonElement>('stream-stop').addEventListener('click', stopReplay)
}

if (typeof document !== 'undefined' && document.getElementById('connect')) {
  main()
}

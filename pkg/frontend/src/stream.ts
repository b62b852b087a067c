import type { SanitizationResult, WindowJson } from './types'

export interface StreamFrameView {
  seq: number
  original: WindowJson
  result: SanitizationResult
}

interface StreamHooks {
  onFrame: (view: StreamFrameView) => void
  onError?: (seq: number | null, message: string) => void
  onClose?: () => void
}

type SocketFactory = (url: string) => WebSocket

const SOCKET_OPEN = 1 // WebSocket.OPEN, without touching the global

// One WebSocket session: sequenced frames out, matched results in. On a drop
// the session reconnects and keeps counting from the last sequence number, so
// downstream views never observe reordering.
export class StreamSession {
  private ws: WebSocket | null = null
  private seq = 0
  private pending = new Map<number, WindowJson>()
  private closed = false
  private reconnectDelayMs = 250

  constructor(
    private url: string,
    private hooks: StreamHooks,
    private socketFactory: SocketFactory = (u) => new WebSocket(u),
  ) {}

  connect(): void {
    this.ws = this.socketFactory(this.url)
    this.ws.onmessage = (ev: MessageEvent) => this.handleMessage(String(ev.data))
    this.ws.onclose = () => {
      if (this.closed) return
      this.hooks.onClose?.()
      setTimeout(() => this.connect(), this.reconnectDelayMs)
    }
  }

  get lastSeq(): number {
    return this.seq
  }

  send(window: WindowJson): number {
    if (!this.ws || this.ws.readyState !== SOCKET_OPEN) {
      throw new Error('stream not connected')
    }
    this.seq += 1
    this.pending.set(this.seq, window)
    this.ws.send(JSON.stringify({ seq: this.seq, window }))
    return this.seq
  }

  private handleMessage(raw: string): void {
    let payload: SanitizationResult
    try {
      payload = JSON.parse(raw)
    } catch {
      this.hooks.onError?.(null, 'unparseable server frame')
      return
    }
    const seq = payload.seq ?? null
    if (payload.error) {
      if (seq !== null) this.pending.delete(seq)
      this.hooks.onError?.(seq, payload.error)
      return
    }
    if (seq === null) return
    const original = this.pending.get(seq)
    this.pending.delete(seq)
    if (!original) return
    this.hooks.onFrame({ seq, original, result: payload })
  }

  close(): void {
    this.closed = true
    this.ws?.close()
  }
}

import { describe, expect, it } from 'vitest'

import { StreamSession, StreamFrameView } from '../src/stream'
import { FakeGateway, FakeSocket, encodeClassWindow } from './fakeGateway'

const NAMES = ['a', 'b', 'c']

function session(gateway: FakeGateway, frames: StreamFrameView[], errors: string[] = []) {
  const s = new StreamSession(
    'ws://fake/api/v1/stream',
    {
      onFrame: (v) => frames.push(v),
      onError: (_seq, message) => errors.push(message),
    },
    (url) => new FakeSocket(url, gateway) as unknown as WebSocket,
  )
  s.connect()
  return s
}

describe('StreamSession', () => {
  it('delivers replies in order with matching sequence numbers', () => {
    const gateway = new FakeGateway(NAMES, { white: NAMES, black: [], gray: [] })
    const frames: StreamFrameView[] = []
    const s = session(gateway, frames)
    for (let i = 0; i < 100; i++) s.send(encodeClassWindow(i % 3))
    expect(frames.map((f) => f.seq)).toEqual(Array.from({ length: 100 }, (_, i) => i + 1))
    expect(frames.every((f) => f.result.action === 'passthrough')).toBe(true)
  })

  it('pairs each reply with the original window', () => {
    const gateway = new FakeGateway(NAMES, {
      white: ['a'], black: ['b'], gray: ['c'],
    })
    const frames: StreamFrameView[] = []
    const s = session(gateway, frames)
    const w = encodeClassWindow(1)
    s.send(w)
    expect(frames[0].original).toBe(w)
    expect(frames[0].result.action).toBe('replaced')
    expect(frames[0].result.window.data[0][0]).not.toBe(w.data[0][0])
  })

  it('resumes sequence numbering across reconnects', () => {
    const gateway = new FakeGateway(NAMES, { white: NAMES, black: [], gray: [] })
    const frames: StreamFrameView[] = []
    const s = session(gateway, frames)
    s.send(encodeClassWindow(0))
    s.send(encodeClassWindow(1))
    const first = FakeSocket.instances[FakeSocket.instances.length - 1]
    first.dropConnection()
    return new Promise<void>((resolve) => {
      setTimeout(() => {
        s.send(encodeClassWindow(2))
        expect(frames.map((f) => f.seq)).toEqual([1, 2, 3])
        s.close()
        resolve()
      }, 300)
    })
  })

  it('reports error frames without breaking the session', () => {
    const gateway = new FakeGateway(NAMES, { white: NAMES, black: [], gray: [] })
    const frames: StreamFrameView[] = []
    const errors: string[] = []
    const s = session(gateway, frames, errors)
    const socket = FakeSocket.instances[FakeSocket.instances.length - 1]
    socket.onmessage?.({ data: JSON.stringify({ seq: 9, error: 'malformed frame' }) })
    s.send(encodeClassWindow(0))
    expect(errors).toEqual(['malformed frame'])
    expect(frames).toHaveLength(1)
  })
})

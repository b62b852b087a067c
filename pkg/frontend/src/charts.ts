import type { WindowJson } from './types'

// Minimal canvas line chart: each channel as a polyline, vertically offset.
export function drawWindow(canvas: HTMLCanvasElement, window: WindowJson, accent: string): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width, height } = canvas
  ctx.clearRect(0, 0, width, height)
  const { length, channels, data } = window

  let lo = Infinity
  let hi = -Infinity
  for (const row of data) {
    for (const v of row) {
      if (v < lo) lo = v
      if (v > hi) hi = v
    }
  }
  const span = hi - lo || 1
  const lane = height / channels

  for (let c = 0; c < channels; c++) {
    ctx.beginPath()
    ctx.strokeStyle = accent
    ctx.globalAlpha = 0.45 + (0.55 * c) / Math.max(1, channels - 1)
    ctx.lineWidth = 1
    for (let t = 0; t < length; t++) {
      const x = (t / Math.max(1, length - 1)) * width
      const norm = (data[t][c] - lo) / span
      const y = lane * c + lane - norm * lane
      if (t === 0) ctx.moveTo(x, y)
      else ctx.lineTo(x, y)
    }
    ctx.stroke()
  }
  ctx.globalAlpha = 1
}

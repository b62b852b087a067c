import type { WindowJson } from './types'

export interface ReplayWindow {
  window: WindowJson
  label: string
}

// Parses the dataset CSV format (two '#' header lines, then label,v0,..,vC-1
// per timestep) and cuts non-overlapping windows so the console can replay a
// recording through the gateway without live sensors.
export function parseDatasetCsv(text: string, windowLength: number): ReplayWindow[] {
  const lines = text.split('\n').filter((l) => l.trim().length > 0)
  if (lines.length < 3 || !lines[0].startsWith('#classes:') || !lines[1].startsWith('#channels:')) {
    throw new Error('not a dataset CSV: expected "#classes:" and "#channels:" headers')
  }
  const classNames = lines[0].slice('#classes:'.length).split(',').map((s) => s.trim())
  const channels = parseInt(lines[1].slice('#channels:'.length).trim(), 10)
  const labels: number[] = []
  const rows: number[][] = []
  for (const line of lines.slice(2)) {
    const parts = line.split(',')
    if (parts.length !== channels + 1) {
      throw new Error(`bad row: expected ${channels + 1} columns, got ${parts.length}`)
    }
    labels.push(parseInt(parts[0], 10))
    rows.push(parts.slice(1).map(Number))
  }

  const windows: ReplayWindow[] = []
  for (let start = 0; start + windowLength <= rows.length; start += windowLength) {
    const slab = rows.slice(start, start + windowLength)
    const votes = new Map<number, number>()
    for (const l of labels.slice(start, start + windowLength)) {
      votes.set(l, (votes.get(l) ?? 0) + 1)
    }
    let majority = labels[start]
    let best = -1
    for (const [label, count] of [...votes.entries()].sort((a, b) => a[0] - b[0])) {
      if (count > best) {
        best = count
        majority = label
      }
    }
    windows.push({
      window: { length: windowLength, channels, data: slab },
      label: classNames[majority] ?? `class ${majority}`,
    })
  }
  return windows
}

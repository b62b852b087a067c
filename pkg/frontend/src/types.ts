// Wire types for the gateway API (see the gateway README for the contract).

export type Category = 'white' | 'black' | 'gray'
export type CategoryOrUnlisted = Category | 'unlisted'

export interface PolicyDoc {
  white: string[]
  black: string[]
  gray: string[]
  version: number
}

export interface WindowJson {
  length: number
  channels: number
  data: number[][]
}

export interface SanitizationResult {
  action: 'passthrough' | 'replaced'
  top1: string
  replacement: string | null
  policy_version: number
  window: WindowJson
  top_k: [string, number][]
  seq?: number
  error?: string
}

export interface ActivityInfo {
  name: string
  category: CategoryOrUnlisted
}

export interface MetricsSnapshot {
  windows_seen: number
  windows_replaced: number
  per_class_replacements: Record<string, number>
  policy_version: number
  uptime_s: number
}

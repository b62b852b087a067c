import type { ActivityInfo, MetricsSnapshot, PolicyDoc, SanitizationResult, WindowJson } from './types'

export class PolicyRejected extends Error {
  constructor(public errors: string[]) {
    super(errors.join('; '))
  }
}

// Thin fetch wrapper over the gateway HTTP endpoints.
export class GatewayClient {
  constructor(public baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`
  }

  async getPolicy(): Promise<PolicyDoc> {
    const resp = await this.fetchFn(this.url('/policy'))
    if (!resp.ok) throw new Error(`policy GET failed: ${resp.status}`)
    return resp.json()
  }

  async putPolicy(doc: PolicyDoc): Promise<number> {
    const resp = await this.fetchFn(this.url('/policy'), {
      method: 'PUT',
      body: JSON.stringify(doc),
    })
    if (resp.status === 400) {
      const body = await resp.json()
      throw new PolicyRejected(body.errors ?? ['rejected'])
    }
    if (!resp.ok) throw new Error(`policy PUT failed: ${resp.status}`)
    return (await resp.json()).version
  }

  async classify(window: WindowJson): Promise<{ top1: string; ranking: [string, number][] }> {
    const resp = await this.fetchFn(this.url('/classify'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(window),
    })
    if (!resp.ok) throw new Error(`classify failed: ${resp.status}`)
    return resp.json()
  }

  async sanitize(window: WindowJson): Promise<SanitizationResult> {
    const resp = await this.fetchFn(this.url('/sanitize'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(window),
    })
    if (!resp.ok) throw new Error(`sanitize failed: ${resp.status}`)
    return resp.json()
  }

  async activities(): Promise<ActivityInfo[]> {
    const resp = await this.fetchFn(this.url('/activities'))
    if (!resp.ok) throw new Error(`activities failed: ${resp.status}`)
    return resp.json()
  }

  async metrics(): Promise<MetricsSnapshot> {
    const resp = await this.fetchFn(this.url('/metrics'))
    if (!resp.ok) throw new Error(`metrics failed: ${resp.status}`)
    return resp.json()
  }

  streamUrl(): string {
    return this.baseUrl.replace(/^http/, 'ws') + '/api/v1/stream'
  }
}

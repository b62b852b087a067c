import { GatewayClient, PolicyRejected } from './api'
import type { Category, PolicyDoc } from './types'

export const CATEGORIES: Category[] = ['white', 'black', 'gray']

// State behind the three-column policy editor. A chip lives in exactly one
// list; edits mark the view dirty until a save round-trips through the
// gateway. Server rejections keep the edits and surface the messages.
export class PolicyEditor {
  lists: Record<Category, string[]> = { white: [], black: [], gray: [] }
  serverVersion = 0
  dirty = false
  validationMessages: string[] = []

  load(doc: PolicyDoc): void {
    this.lists = {
      white: [...doc.white].sort(),
      black: [...doc.black].sort(),
      gray: [...doc.gray].sort(),
    }
    this.serverVersion = doc.version
    this.dirty = false
    this.validationMessages = []
  }

  allChips(): string[] {
    return CATEGORIES.flatMap((c) => this.lists[c]).sort()
  }

  categoryOf(chip: string): Category | null {
    for (const c of CATEGORIES) {
      if (this.lists[c].includes(chip)) return c
    }
    return null
  }

  move(chip: string, to: Category): void {
    const from = this.categoryOf(chip)
    if (from === to) return
    if (from !== null) {
      this.lists[from] = this.lists[from].filter((name) => name !== chip)
    }
    this.lists[to] = [...this.lists[to], chip].sort()
    this.dirty = true
    this.validationMessages = this.validate()
  }

  validate(): string[] {
    const messages: string[] = []
    if (this.lists.black.length > 0 && this.lists.gray.length === 0) {
      messages.push('black-listed activities need at least one gray replacement')
    }
    return messages
  }

  canSave(): boolean {
    return this.dirty && this.validate().length === 0
  }

  toWire(): PolicyDoc {
    return {
      white: [...this.lists.white].sort(),
      black: [...this.lists.black].sort(),
      gray: [...this.lists.gray].sort(),
      version: this.serverVersion,
    }
  }

  async save(client: GatewayClient): Promise<boolean> {
    if (!this.canSave()) return false
    try {
      this.serverVersion = await client.putPolicy(this.toWire())
      this.dirty = false
      this.validationMessages = []
      return true
    } catch (err) {
      // Keep the edits; show what the server disliked.
      if (err instanceof PolicyRejected) {
        this.validationMessages = err.errors
      } else {
        this.validationMessages = [`save failed: ${(err as Error).message}`]
      }
      return false
    }
  }

  async reload(client: GatewayClient): Promise<void> {
    this.load(await client.getPolicy())
  }
}

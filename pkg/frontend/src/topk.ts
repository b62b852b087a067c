import type { CategoryOrUnlisted } from './types'

export interface TopKBar {
  name: string
  score: number
  widthPct: number
  category: CategoryOrUnlisted
}

export const CATEGORY_COLORS: Record<CategoryOrUnlisted, string> = {
  white: '#e8e8e8',
  black: '#e05555',
  gray: '#8fa3b8',
  unlisted: '#d9b85c',
}

// Render model for the similarity panel: bars sorted by score, sized by the
// cosine value clamped to [0, 1], colored by the class's current category.
export function topKBars(
  topK: [string, number][],
  categories: Map<string, CategoryOrUnlisted>,
): TopKBar[] {
  const bars = topK.map(([name, score]) => ({
    name,
    score,
    widthPct: Math.max(0, Math.min(1, score)) * 100,
    category: categories.get(name) ?? ('unlisted' as CategoryOrUnlisted),
  }))
  bars.sort((a, b) => b.score - a.score || a.name.localeCompare(b.name))
  return bars
}

/**
 * Tiny deterministic SVG canvas: fixed styling, no randomness, so
 * byte-identical inputs give byte-identical figures.
 */

export interface Margin {
  top: number
  right: number
  bottom: number
  left: number
}

const FMT = (x: number): string => {
  if (!Number.isFinite(x)) return '0'
  return x.toFixed(2).replace(/\.?0+$/, '') || '0'
}

export class Svg {
  readonly width: number
  readonly height: number
  private parts: string[] = []

  constructor(width: number, height: number) {
    this.width = width
    this.height = height
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = '#888', strokeWidth = 1): void {
    this.parts.push(
      `<line x1="${FMT(x1)}" y1="${FMT(y1)}" x2="${FMT(x2)}" y2="${FMT(y2)}" ` +
        `stroke="${stroke}" stroke-width="${strokeWidth}"/>`,
    )
  }

  polyline(points: Array<[number, number]>, stroke = '#1f77b4', strokeWidth = 1.5): void {
    const pts = points.map(([x, y]) => `${FMT(x)},${FMT(y)}`).join(' ')
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="${strokeWidth}"/>`,
    )
  }

  circle(cx: number, cy: number, r: number, fill = '#1f77b4'): void {
    this.parts.push(`<circle cx="${FMT(cx)}" cy="${FMT(cy)}" r="${r}" fill="${fill}"/>`)
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${FMT(x)}" y="${FMT(y)}" width="${FMT(w)}" height="${FMT(h)}" fill="${fill}"/>`,
    )
  }

  text(x: number, y: number, content: string, opts: { anchor?: string; size?: number } = {}): void {
    const anchor = opts.anchor ?? 'start'
    const size = opts.size ?? 12
    const escaped = content
      .replace(/&/g, '&amp;')
      .replace(/</g, '&lt;')
      .replace(/>/g, '&gt;')
    this.parts.push(
      `<text x="${FMT(x)}" y="${FMT(y)}" font-family="sans-serif" font-size="${size}" ` +
        `text-anchor="${anchor}">${escaped}</text>`,
    )
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">\n<rect width="${this.width}" ` +
      `height="${this.height}" fill="white"/>\n` +
      this.parts.join('\n') +
      '\n</svg>\n'
    )
  }
}

/** Affine map from a data interval onto a pixel interval. */
export function scaleLinear(
  domain: [number, number],
  range: [number, number],
): (x: number) => number {
  const [d0, d1] = domain
  const [r0, r1] = range
  const span = d1 - d0 || 1
  return (x) => r0 + ((x - d0) / span) * (r1 - r0)
}

/** Evenly spaced tick values across a domain. */
export function ticks(domain: [number, number], count: number): number[] {
  const [lo, hi] = domain
  const out: number[] = []
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count)
  return out
}

/** Blue-white-red diverging color for t in [-1, 1]. */
export function diverging(t: number): string {
  const clamped = Math.max(-1, Math.min(1, t))
  const r = Math.round(clamped > 0 ? 255 : 255 * (1 + clamped))
  const b = Math.round(clamped < 0 ? 255 : 255 * (1 - clamped))
  const g = Math.round(255 * (1 - Math.abs(clamped)))
  return `rgb(${r},${g},${b})`
}

/**
 * Figure builders: each one reads primary-solver output files and
 * returns an SVG string. No physics is recomputed here.
 */

import { readFileSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { CsvFormatError, readTable, type Table } from './csv.js'
import { Svg, diverging, scaleLinear, ticks } from './svg.js'

const WIDTH = 640
const HEIGHT = 440
const MARGIN = { top: 40, right: 30, bottom: 55, left: 75 }

/** Least-squares slope of y against x. */
export function fitSlope(x: number[], y: number[]): number {
  const n = x.length
  if (n < 2) throw new CsvFormatError('slope fit needs at least 2 rows')
  const mx = x.reduce((a, b) => a + b, 0) / n
  const my = y.reduce((a, b) => a + b, 0) / n
  let num = 0
  let den = 0
  for (let i = 0; i < n; i++) {
    num += (x[i] - mx) * (y[i] - my)
    den += (x[i] - mx) * (x[i] - mx)
  }
  if (den === 0) throw new CsvFormatError('slope fit needs distinct x values')
  return num / den
}

/** Log-log convergence slope of a table with columns h and error. */
export function convergenceSlope(table: Table): number {
  const logH = table.data['h'].map(Math.log)
  const logE = table.data['error'].map(Math.log)
  return fitSlope(logH, logE)
}

interface Frame {
  svg: Svg
  sx: (x: number) => number
  sy: (y: number) => number
}

function frame(
  xDomain: [number, number],
  yDomain: [number, number],
  xLabel: string,
  yLabel: string,
  title: string,
  xTickFmt: (v: number) => string,
  yTickFmt: (v: number) => string,
): Frame {
  const svg = new Svg(WIDTH, HEIGHT)
  const sx = scaleLinear(xDomain, [MARGIN.left, WIDTH - MARGIN.right])
  const sy = scaleLinear(yDomain, [HEIGHT - MARGIN.bottom, MARGIN.top])
  const x0 = MARGIN.left
  const x1 = WIDTH - MARGIN.right
  const y0 = HEIGHT - MARGIN.bottom
  const y1 = MARGIN.top
  svg.line(x0, y0, x1, y0, '#333')
  svg.line(x0, y0, x0, y1, '#333')
  for (const t of ticks(xDomain, 4)) {
    svg.line(sx(t), y0, sx(t), y0 + 5, '#333')
    svg.text(sx(t), y0 + 20, xTickFmt(t), { anchor: 'middle', size: 11 })
  }
  for (const t of ticks(yDomain, 4)) {
    svg.line(x0 - 5, sy(t), x0, sy(t), '#333')
    svg.text(x0 - 8, sy(t) + 4, yTickFmt(t), { anchor: 'end', size: 11 })
  }
  svg.text((x0 + x1) / 2, HEIGHT - 12, xLabel, { anchor: 'middle' })
  svg.text(16, (y0 + y1) / 2, yLabel, { anchor: 'middle' })
  svg.text((x0 + x1) / 2, 22, title, { anchor: 'middle', size: 14 })
  return { svg, sx, sy }
}

function span(values: number[]): [number, number] {
  const finite = values.filter(Number.isFinite)
  if (finite.length === 0) return [0, 1]
  let lo = Math.min(...finite)
  let hi = Math.max(...finite)
  if (lo === hi) {
    lo -= 0.5
    hi += 0.5
  }
  return [lo, hi]
}

const sci = (v: number): string => v.toExponential(1)
const plain = (v: number): string => {
  const a = Math.abs(v)
  if (a !== 0 && (a < 1e-3 || a >= 1e4)) return v.toExponential(1)
  return Number(v.toPrecision(3)).toString()
}

/** Log-log error-vs-h plot with an annotated least-squares slope. */
export function convergenceFigure(csvPath: string): string {
  const table = readTable(csvPath, ['level', 'm', 'h', 'error'])
  if (table.rowCount < 3) {
    throw new CsvFormatError(`${csvPath}: slope fit needs >= 3 rows, got ${table.rowCount}`)
  }
  const logH = table.data['h'].map((v) => Math.log10(v))
  const logE = table.data['error'].map((v) => Math.log10(v))
  const slope = fitSlope(logH, logE)
  const { svg, sx, sy } = frame(
    span(logH),
    span(logE),
    'log10 h',
    'log10 error',
    'Convergence',
    plain,
    plain,
  )
  const pts: Array<[number, number]> = logH.map((x, i) => [sx(x), sy(logE[i])])
  svg.polyline(pts)
  for (const [x, y] of pts) svg.circle(x, y, 3)
  svg.text(WIDTH - MARGIN.right, MARGIN.top + 16, `slope = ${slope.toFixed(3)}`, {
    anchor: 'end',
  })
  return svg.render()
}

/** Per-step energy ledger trace: dissipation, noise input and residual. */
export function ledgerFigure(csvPath: string): string {
  const table = readTable(csvPath, ['n', 't_n', 'dissipation', 'noise_input', 'residual'])
  const t = table.data['t_n']
  const series: Array<[string, string, number[]]> = [
    ['dissipation', '#1f77b4', table.data['dissipation']],
    ['noise_input', '#2ca02c', table.data['noise_input']],
    ['residual', '#d62728', table.data['residual']],
  ]
  const all = series.flatMap(([, , v]) => v)
  const yDomain = span(all)
  if (yDomain[0] > 0) yDomain[0] = 0
  if (yDomain[1] < 0) yDomain[1] = 0
  const { svg, sx, sy } = frame(span(t), yDomain, 't', 'per-step energy', 'Energy ledger', plain, sci)
  svg.line(sx(t[0]), sy(0), sx(t[t.length - 1]), sy(0), '#bbb')
  let row = 0
  for (const [label, color, values] of series) {
    svg.polyline(
      t.map((x, i) => [sx(x), sy(values[i])]),
      color,
    )
    svg.text(WIDTH - MARGIN.right, MARGIN.top + 16 + 16 * row, label, { anchor: 'end', size: 11 })
    svg.circle(WIDTH - MARGIN.right - 80, MARGIN.top + 12 + 16 * row, 4, color)
    row += 1
  }
  return svg.render()
}

/** Dissipation mass against time. */
export function dissipationFigure(csvPath: string): string {
  const table = readTable(csvPath, ['t_n', 'dissipation'])
  const t = table.data['t_n']
  const d = table.data['dissipation']
  const dom = span(d)
  if (dom[0] > 0) dom[0] = 0
  const { svg, sx, sy } = frame(span(t), dom, 't', 'dissipation mass', 'Dissipation', plain, sci)
  svg.polyline(t.map((x, i) => [sx(x), sy(d[i])]))
  return svg.render()
}

interface Manifest {
  grid: { dim: number; m: number; h: number }
  snapshots: Array<{ time: number; file: string }>
}

/** Space-time heatmap of the cell values listed in a run manifest. */
export function heatmapFigure(manifestPath: string): string {
  let manifest: Manifest
  try {
    manifest = JSON.parse(readFileSync(manifestPath, 'utf8')) as Manifest
  } catch {
    throw new CsvFormatError(`cannot read manifest ${manifestPath}`)
  }
  if (!manifest.snapshots || manifest.snapshots.length === 0) {
    throw new CsvFormatError(`${manifestPath}: manifest lists no snapshots`)
  }
  if (manifest.grid.dim !== 1) {
    throw new CsvFormatError('heatmap supports one-dimensional runs')
  }
  const dir = dirname(manifestPath)
  const frames = manifest.snapshots.map((s) => ({
    time: s.time,
    values: readTable(join(dir, s.file), ['i', 'value']).data['value'],
  }))
  const m = frames[0].values.length
  const vmax = Math.max(1e-12, ...frames.flatMap((f) => f.values.map(Math.abs)))
  const svg = new Svg(WIDTH, HEIGHT)
  const x0 = MARGIN.left
  const y0 = HEIGHT - MARGIN.bottom
  const cellW = (WIDTH - MARGIN.left - MARGIN.right) / frames.length
  const cellH = (y0 - MARGIN.top) / m
  frames.forEach((f, j) => {
    f.values.forEach((v, i) => {
      svg.rect(x0 + j * cellW, y0 - (i + 1) * cellH, cellW + 0.5, cellH + 0.5, diverging(v / vmax))
    })
  })
  svg.text((x0 + WIDTH - MARGIN.right) / 2, 22, 'Space-time values', { anchor: 'middle', size: 14 })
  svg.text((x0 + WIDTH - MARGIN.right) / 2, HEIGHT - 12, 't (snapshots)', { anchor: 'middle' })
  svg.text(16, (y0 + MARGIN.top) / 2, 'x', { anchor: 'middle' })
  frames.forEach((f, j) => {
    svg.text(x0 + (j + 0.5) * cellW, y0 + 20, plain(f.time), { anchor: 'middle', size: 10 })
  })
  return svg.render()
}

export const FIGURES: Record<string, (input: string) => string> = {
  convergence: convergenceFigure,
  ledger: ledgerFigure,
  dissipation: dissipationFigure,
  heatmap: heatmapFigure,
}

#!/usr/bin/env node
/**
 * stofv-plot <kind> <input> -o <output.svg>
 *
 * kind: convergence | ledger | dissipation | heatmap
 * input: a solver CSV (convergence table or energy ledger) or, for
 * heatmap, a run manifest.json.
 *
 * Exit 0 on success, 1 on bad input with a one-line diagnostic.
 */

import { writeFileSync } from 'node:fs'
import { CsvFormatError } from './csv.js'
import { FIGURES } from './figures.js'

export function run(argv: string[]): number {
  const args = [...argv]
  let output = 'figure.svg'
  const positional: string[] = []
  while (args.length > 0) {
    const arg = args.shift() as string
    if (arg === '-o' || arg === '--output') {
      const next = args.shift()
      if (next === undefined) {
        console.error('error: -o requires a path')
        return 1
      }
      output = next
    } else {
      positional.push(arg)
    }
  }
  if (positional.length !== 2) {
    console.error('usage: stofv-plot <convergence|ledger|dissipation|heatmap> <input> [-o out.svg]')
    return 1
  }
  const [kind, input] = positional
  const figure = FIGURES[kind]
  if (figure === undefined) {
    console.error(`error: unknown figure kind '${kind}'`)
    return 1
  }
  try {
    writeFileSync(output, figure(input))
  } catch (err) {
    if (err instanceof CsvFormatError) {
      console.error(`error: ${err.message}`)
      return 1
    }
    throw err
  }
  return 0
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop() ?? '')
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)))
}

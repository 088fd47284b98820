/**
 * Reader for the solver's CSV contract: '#'-prefixed metadata lines,
 * one header row, numeric body, LF line endings.
 */

import { readFileSync } from 'node:fs'
import Papa from 'papaparse'

export class CsvFormatError extends Error {
  constructor(message: string) {
    super(message)
    this.name = 'CsvFormatError'
  }
}

export interface Table {
  /** metadata from '#' lines, e.g. config_hash, seed */
  meta: Record<string, string>
  columns: string[]
  /** column name -> numeric values, one entry per body row */
  data: Record<string, number[]>
  rowCount: number
}

/** Parse a solver CSV and check that every required column is present. */
export function readTable(path: string, required: string[] = []): Table {
  let raw: string
  try {
    raw = readFileSync(path, 'utf8')
  } catch {
    throw new CsvFormatError(`cannot read ${path}`)
  }
  const meta: Record<string, string> = {}
  const bodyLines: string[] = []
  for (const line of raw.split('\n')) {
    if (line.startsWith('#')) {
      const eq = line.indexOf('=')
      if (eq > 0) meta[line.slice(1, eq).trim()] = line.slice(eq + 1).trim()
    } else if (line.trim() !== '') {
      bodyLines.push(line)
    }
  }
  if (bodyLines.length === 0) {
    throw new CsvFormatError(`${path}: no header row found`)
  }
  const parsed = Papa.parse<Record<string, string>>(bodyLines.join('\n'), {
    header: true,
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    throw new CsvFormatError(`${path}: ${parsed.errors[0].message}`)
  }
  const columns = parsed.meta.fields ?? []
  const missing = required.filter((c) => !columns.includes(c))
  if (missing.length > 0) {
    throw new CsvFormatError(
      `${path}: missing column(s) ${missing.join(', ')}; found ${columns.join(', ')}`,
    )
  }
  const data: Record<string, number[]> = {}
  for (const col of columns) data[col] = []
  for (const row of parsed.data) {
    for (const col of columns) {
      const cell = row[col]
      const value = cell === undefined || cell === '' ? NaN : Number(cell)
      if (cell !== undefined && cell !== '' && Number.isNaN(value) && cell !== 'nan') {
        throw new CsvFormatError(`${path}: non-numeric value '${cell}' in column ${col}`)
      }
      data[col].push(value)
    }
  }
  return { meta, columns, data, rowCount: parsed.data.length }
}

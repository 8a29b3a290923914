/** Corpus manifest types and serialization (format_version 1).
 *
 * Matches the primary toolkit's manifest schema: a single JSON document
 * indexing one image per (seed, prompt_id) with per-image artifact paths
 * (relative to the manifest's directory) and metric scores.
 */

import { readFileSync, writeFileSync } from 'node:fs'

export type PromptKind =
  | 'dense_caption'
  | 'parti'
  | 'synthetic'
  | 'inpaint_removal'
  | 'inpaint_completion'

export interface PromptSpec {
  prompt_id: string
  text: string
  prompt_kind: PromptKind
  object_category?: string
  modifier?: string
}

export interface ImageEntry {
  seed: number
  prompt_id: string
  image_path: string
  artifacts: Record<string, string>
  scores: Record<string, number>
}

export interface Manifest {
  format_version: 1
  num_seeds: number
  model_name: string
  prompt_set_id: string
  prompts: PromptSpec[]
  images: ImageEntry[]
}

export function serializeManifest(manifest: Manifest): string {
  // fixed key order and sorted maps so reruns are byte-identical
  const doc = {
    format_version: manifest.format_version,
    num_seeds: manifest.num_seeds,
    model_name: manifest.model_name,
    prompt_set_id: manifest.prompt_set_id,
    prompts: manifest.prompts.map((p) => ({
      prompt_id: p.prompt_id,
      text: p.text,
      prompt_kind: p.prompt_kind,
      ...(p.object_category !== undefined ? { object_category: p.object_category } : {}),
      ...(p.modifier !== undefined ? { modifier: p.modifier } : {}),
    })),
    images: manifest.images.map((rec) => ({
      seed: rec.seed,
      prompt_id: rec.prompt_id,
      image_path: rec.image_path,
      artifacts: sortedRecord(rec.artifacts),
      scores: sortedRecord(rec.scores),
    })),
  }
  return JSON.stringify(doc, null, 2) + '\n'
}

function sortedRecord<T>(rec: Record<string, T>): Record<string, T> {
  const out: Record<string, T> = {}
  for (const key of Object.keys(rec).sort()) out[key] = rec[key]
  return out
}

export function writeManifest(manifest: Manifest, path: string): void {
  writeFileSync(path, serializeManifest(manifest), 'utf-8')
}

export function readManifest(path: string): Manifest {
  const doc = JSON.parse(readFileSync(path, 'utf-8'))
  if (doc.format_version !== 1) throw new Error(`unsupported format_version ${doc.format_version}`)
  return doc as Manifest
}

/** Job runner: seed-grid generation, artifact extraction, scoring.
 *
 * The adapter's only coupling to the analysis toolkit is the file
 * contract (manifest JSON, tensor container, OCR boxes JSON); it never
 * calls into it in-process.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'node:fs'
import { dirname, join, resolve } from 'node:path'

import {
  FEATURE_LAYERS,
  depthMap,
  featureMapA,
  featureMapB,
  objectMask,
  ocrBoxes,
  pooledEmbedding,
  preferenceScore,
} from './artifacts.js'
import { Backend, SchedulerSettings, decodePpm, encodePpm, loadBackend } from './backend.js'
import { ImageEntry, Manifest, PromptSpec, readManifest, writeManifest } from './manifest.js'
import { encodeTensor } from './tensor.js'

export interface GenerationJob {
  model: string
  num_seeds: number
  /** optional explicit seed list, must lie in [0, num_seeds) */
  seeds?: number[]
  prompts: PromptSpec[]
  scheduler: SchedulerSettings
  prompt_set_id: string
  output_root: string
}

export interface Failure {
  seed: number
  prompt_id: string
  stage: string
  error: string
}

export const ALL_ARTIFACT_KINDS = [
  'feature_maps',
  'pooled_embedding',
  'mask',
  'depth',
  'ocr_boxes',
  'preference_score',
] as const

export function readJob(path: string): GenerationJob {
  const job = JSON.parse(readFileSync(path, 'utf-8')) as GenerationJob
  validateJob(job)
  return job
}

export function validateJob(job: GenerationJob): void {
  if (!Number.isInteger(job.num_seeds) || job.num_seeds < 1) {
    throw new Error(`num_seeds must be a positive integer, got ${job.num_seeds}`)
  }
  if (!Array.isArray(job.prompts) || job.prompts.length === 0) throw new Error('prompts must be non-empty')
  const ids = new Set<string>()
  for (const p of job.prompts) {
    if (!p.prompt_id || !p.text || !p.prompt_kind) throw new Error('prompts need prompt_id, text, prompt_kind')
    if (ids.has(p.prompt_id)) throw new Error(`duplicate prompt_id ${p.prompt_id}`)
    ids.add(p.prompt_id)
  }
  if (job.seeds) {
    for (const s of job.seeds) {
      if (!Number.isInteger(s) || s < 0 || s >= job.num_seeds) {
        throw new Error(`seed ${s} outside [0, ${job.num_seeds})`)
      }
    }
  }
  if (!job.scheduler || job.scheduler.steps < 1 || job.scheduler.eta < 0) {
    throw new Error('scheduler needs steps >= 1 and eta >= 0')
  }
  if (!job.output_root) throw new Error('output_root is required')
}

export function jobSeeds(job: GenerationJob): number[] {
  return job.seeds ?? Array.from({ length: job.num_seeds }, (_, i) => i)
}

export function manifestPath(job: GenerationJob): string {
  return join(job.output_root, 'manifest.json')
}

/** One image per (seed, prompt); per-image failures are recorded, not fatal. */
export function generateCorpus(job: GenerationJob): { manifest: Manifest; failures: Failure[] } {
  validateJob(job)
  const backend: Backend = loadBackend(job.model) // hard error before any write
  return generateCorpusWithBackend(job, backend)
}

/** Same runner with an injected backend (exposed for testing/embedding). */
export function generateCorpusWithBackend(
  job: GenerationJob,
  backend: Backend,
): { manifest: Manifest; failures: Failure[] } {
  const root = resolve(job.output_root)
  mkdirSync(join(root, 'images'), { recursive: true })
  const images: ImageEntry[] = []
  const failures: Failure[] = []
  for (const seed of jobSeeds(job)) {
    for (const prompt of job.prompts) {
      const rel = join('images', `seed${seed}_${prompt.prompt_id}.ppm`)
      try {
        const image = backend.render(seed, prompt.text, job.scheduler)
        writeFileSync(join(root, rel), encodePpm(image))
        images.push({ seed, prompt_id: prompt.prompt_id, image_path: rel, artifacts: {}, scores: {} })
      } catch (err) {
        failures.push({ seed, prompt_id: prompt.prompt_id, stage: 'generate', error: String(err) })
      }
    }
  }
  const manifest: Manifest = {
    format_version: 1,
    num_seeds: job.num_seeds,
    model_name: backend.name,
    prompt_set_id: job.prompt_set_id,
    prompts: job.prompts,
    images,
  }
  writeManifest(manifest, manifestPath(job))
  return { manifest, failures }
}

export function extractArtifacts(manifestFile: string, kinds: readonly string[]): Failure[] {
  const manifest = readManifest(manifestFile)
  const root = dirname(resolve(manifestFile))
  mkdirSync(join(root, 'artifacts'), { recursive: true })
  const failures: Failure[] = []
  for (const rec of manifest.images) {
    try {
      const raw = readFileSync(join(root, rec.image_path))
      const image = decodePpm(raw)
      const stem = `seed${rec.seed}_${rec.prompt_id}`
      const put = (key: string, bytes: Buffer, ext: string) => {
        const rel = join('artifacts', `${stem}.${key}.${ext}`)
        writeFileSync(join(root, rel), bytes)
        rec.artifacts[key] = rel
      }
      for (const kind of kinds) {
        if (kind === 'feature_maps') {
          put(`feature_maps.${FEATURE_LAYERS[0]}`, encodeTensor(featureMapA(image)), 'sdlb')
          put(`feature_maps.${FEATURE_LAYERS[1]}`, encodeTensor(featureMapB(image)), 'sdlb')
        } else if (kind === 'pooled_embedding') {
          put(kind, encodeTensor(pooledEmbedding(image)), 'sdlb')
        } else if (kind === 'mask') {
          const mask = objectMask(image)
          if (mask !== null) put(kind, encodeTensor(mask), 'sdlb') // absent => no object
        } else if (kind === 'depth') {
          put(kind, encodeTensor(depthMap(image)), 'sdlb')
        } else if (kind === 'ocr_boxes') {
          put(kind, Buffer.from(JSON.stringify(ocrBoxes(raw), null, 2) + '\n', 'utf-8'), 'json')
        } else if (kind === 'preference_score') {
          const score = preferenceScore(image)
          put(kind, Buffer.from(JSON.stringify({ hpsv2: score }, null, 2) + '\n', 'utf-8'), 'json')
        } else {
          throw new Error(`unknown artifact kind ${kind}`)
        }
      }
    } catch (err) {
      failures.push({ seed: rec.seed, prompt_id: rec.prompt_id, stage: 'extract', error: String(err) })
    }
  }
  writeManifest(manifest, manifestFile)
  return failures
}

export function scorePreferences(manifestFile: string): { scores: number[]; failures: Failure[] } {
  const manifest = readManifest(manifestFile)
  const root = dirname(resolve(manifestFile))
  const scores: number[] = []
  const failures: Failure[] = []
  for (const rec of manifest.images) {
    try {
      const image = decodePpm(readFileSync(join(root, rec.image_path)))
      const score = preferenceScore(image)
      rec.scores['hpsv2'] = score
      scores.push(score)
    } catch (err) {
      failures.push({ seed: rec.seed, prompt_id: rec.prompt_id, stage: 'score', error: String(err) })
    }
  }
  writeManifest(manifest, manifestFile)
  return { scores, failures }
}

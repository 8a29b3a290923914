import assert from 'node:assert/strict'
import { spawnSync } from 'node:child_process'
import { mkdtempSync, readFileSync, readdirSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'
import { test } from 'node:test'

import { objectMask } from '../src/artifacts.js'
import { decodePpm, encodePpm, loadBackend } from '../src/backend.js'
import {
  ALL_ARTIFACT_KINDS,
  GenerationJob,
  extractArtifacts,
  generateCorpus,
  generateCorpusWithBackend,
  manifestPath,
  scorePreferences,
  validateJob,
} from '../src/generate.js'
import { readManifest } from '../src/manifest.js'
import { decodeTensor, encodeTensor, tensorFromValues } from '../src/tensor.js'

function makeJob(outputRoot: string, overrides: Partial<GenerationJob> = {}): GenerationJob {
  return {
    model: 'synthetic',
    num_seeds: 3,
    prompts: [
      { prompt_id: 'p0', text: 'a red bowl on a table', prompt_kind: 'synthetic', object_category: 'bowl', modifier: 'red' },
      { prompt_id: 'p1', text: 'a photo of a quiet harbor', prompt_kind: 'dense_caption' },
    ],
    scheduler: { steps: 40, eta: 0.0 },
    prompt_set_id: 'adapter-test',
    output_root: outputRoot,
    ...overrides,
  }
}

function runAll(root: string): string {
  const job = makeJob(root)
  generateCorpus(job)
  const file = manifestPath(job)
  assert.deepEqual(extractArtifacts(file, [...ALL_ARTIFACT_KINDS]), [])
  assert.deepEqual(scorePreferences(file).failures, [])
  return file
}

const pythonAvailable =
  spawnSync('python3', ['-c', 'import seedscope'], { encoding: 'utf-8' }).status === 0

test('grid job produces one image per (seed, prompt)', () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const { manifest, failures } = generateCorpus(makeJob(root))
  assert.equal(failures.length, 0)
  assert.equal(manifest.images.length, 6)
  assert.equal(manifest.num_seeds, 3)
  const keys = new Set(manifest.images.map((r) => `${r.seed}/${r.prompt_id}`))
  assert.equal(keys.size, 6)
})

test('corpus passes the primary validator with all artifact kinds', { skip: !pythonAvailable }, () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const file = runAll(root)
  const result = spawnSync(
    'python3',
    ['-m', 'seedscope', 'validate', '--manifest', file, '--require', ALL_ARTIFACT_KINDS.join(','),
     '--out', join(root, 'validation')],
    { encoding: 'utf-8' },
  )
  assert.equal(result.status, 0, `primary validate failed: ${result.stderr}`)
  const report = JSON.parse(readFileSync(join(root, 'validation', 'validation_report.json'), 'utf-8'))
  assert.equal(report.ok, true)
  assert.deepEqual(report.issues, [])
})

test('adapter blobs round-trip bit-exactly, locally and through the primary reader', { skip: !pythonAvailable }, () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const file = runAll(root)
  const manifest = readManifest(file)
  const blobRel = manifest.images[0].artifacts['pooled_embedding']
  const blobPath = join(root, blobRel)
  const original = readFileSync(blobPath)

  // local re-encode
  const decoded = decodeTensor(original)
  assert.deepEqual(decoded.shape, [16])
  assert.ok(encodeTensor(decoded).equals(original))

  // primary reader -> writer reproduces the same bytes
  const rewritten = join(root, 'rewritten.sdlb')
  const py = spawnSync(
    'python3',
    ['-c',
     'import sys; from seedscope import read_tensor, write_tensor; ' +
       'write_tensor(read_tensor(sys.argv[1]), sys.argv[2])',
     blobPath, rewritten],
    { encoding: 'utf-8' },
  )
  assert.equal(py.status, 0, py.stderr)
  assert.ok(readFileSync(rewritten).equals(original))
})

test('recorded seeds regenerate the stored images exactly', () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const job = makeJob(root)
  const { manifest } = generateCorpus(job)
  const backend = loadBackend(job.model)
  const promptText = new Map(job.prompts.map((p) => [p.prompt_id, p.text]))
  for (const rec of manifest.images) {
    const stored = readFileSync(join(root, rec.image_path))
    const replayed = encodePpm(backend.render(rec.seed, promptText.get(rec.prompt_id)!, job.scheduler))
    assert.ok(replayed.equals(stored), `seed ${rec.seed} / ${rec.prompt_id} image mismatch`)
  }
})

test('same job twice produces identical manifests and images', () => {
  const rootA = mkdtempSync(join(tmpdir(), 'adapter-'))
  const rootB = mkdtempSync(join(tmpdir(), 'adapter-'))
  const fileA = runAll(rootA)
  const fileB = runAll(rootB)
  assert.equal(readFileSync(fileA, 'utf-8'), readFileSync(fileB, 'utf-8'))
  const imagesA = readdirSync(join(rootA, 'images')).sort()
  assert.deepEqual(imagesA, readdirSync(join(rootB, 'images')).sort())
  for (const name of imagesA) {
    assert.ok(readFileSync(join(rootA, 'images', name)).equals(readFileSync(join(rootB, 'images', name))))
  }
})

test('preference scores populate every image within a plausible band', () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const file = runAll(root)
  const manifest = readManifest(file)
  for (const rec of manifest.images) {
    assert.ok(typeof rec.scores['hpsv2'] === 'number')
    assert.ok(rec.scores['hpsv2'] > 0.2 && rec.scores['hpsv2'] < 0.3, `score ${rec.scores['hpsv2']}`)
  }
})

test('seed controls the latent: same seed shares structure across runs, different seeds differ', () => {
  const backend = loadBackend('synthetic')
  const scheduler = { steps: 40, eta: 0 }
  const a1 = backend.render(7, 'prompt one', scheduler)
  const a2 = backend.render(7, 'prompt one', scheduler)
  const b = backend.render(8, 'prompt one', scheduler)
  assert.deepEqual(a1.pixels, a2.pixels)
  assert.notDeepEqual(a1.pixels, b.pixels)
})

test('unknown model is rejected before any write', () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  assert.throws(() => generateCorpus(makeJob(root, { model: 'sd-weights-not-here' })), /not available/)
  assert.deepEqual(readdirSync(root), [])
})

test('explicit seed outside the range is rejected at validation', () => {
  assert.throws(() => validateJob(makeJob('/tmp/x', { seeds: [0, 3] })), /outside \[0, 3\)/)
  assert.throws(() => validateJob(makeJob('/tmp/x', { num_seeds: 0 })), /num_seeds/)
})

test('ppm encode/decode round-trips', () => {
  const backend = loadBackend('synthetic')
  const image = backend.render(3, 'round trip', { steps: 10, eta: 1 })
  const back = decodePpm(encodePpm(image))
  assert.equal(back.width, image.width)
  assert.deepEqual(back.pixels, image.pixels)
})

test('constant image has no detected object: mask artifact omitted', () => {
  const flat = { width: 8, height: 8, pixels: new Uint8Array(8 * 8 * 3).fill(128) }
  assert.equal(objectMask(flat), null)
})

test('per-image generation failures are recorded, not fatal', () => {
  const root = mkdtempSync(join(tmpdir(), 'adapter-'))
  const backend = loadBackend('synthetic')
  const flaky = {
    name: backend.name,
    render(seed: number, text: string, scheduler: { steps: number; eta: number }) {
      if (seed === 1) throw new Error('synthetic per-image failure')
      return backend.render(seed, text, scheduler)
    },
  }
  const { manifest, failures } = generateCorpusWithBackend(makeJob(root), flaky)
  assert.equal(failures.length, 2) // seed 1 x 2 prompts
  assert.equal(manifest.images.length, 4)
  assert.ok(failures.every((f) => f.stage === 'generate'))
})

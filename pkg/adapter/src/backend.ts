/** Generation backends.
 *
 * A backend renders one image per (seed, prompt): the seed determines the
 * initial latent (the generator is seeded with exactly the recorded seed,
 * mirroring manual-seed semantics), the prompt conditions how the latent
 * is decoded. The built-in "synthetic" backend is a deterministic
 * procedural stand-in used where no model weights are available: it
 * needs no ML runtime yet exercises every downstream contract. Real
 * model backends plug in behind the same interface.
 */

import { hashString, normal, normals, uniform } from './rng.js'

export interface SchedulerSettings {
  steps: number
  eta: number
}

export interface RenderedImage {
  width: number
  height: number
  /** RGB, row-major, values in [0, 255] */
  pixels: Uint8Array
}

export interface Backend {
  readonly name: string
  render(seed: number, promptText: string, scheduler: SchedulerSettings): RenderedImage
}

const SIZE = 16

export class SyntheticBackend implements Backend {
  readonly name = 'synthetic'

  render(seed: number, promptText: string, scheduler: SchedulerSettings): RenderedImage {
    const n = SIZE * SIZE
    // the seed controls the initial latent, shared across prompts
    const latent = normals(seed, 0, n)
    // the prompt controls the decoding field, shared across seeds
    const promptSeed = hashString(promptText)
    const field = normals(promptSeed, 0, n)
    const mixes = [0, 1, 2].map((c) => 0.4 + 0.6 * uniform(promptSeed, n * 2 + c))
    // more steps sharpen the prompt contribution; eta adds per-step noise
    const blend = 1 - Math.exp(-scheduler.steps / 40)
    const noiseAmp = 0.05 * scheduler.eta

    const pixels = new Uint8Array(3 * n)
    for (let i = 0; i < n; i++) {
      for (let c = 0; c < 3; c++) {
        const noise = noiseAmp === 0 ? 0 : noiseAmp * normal(seed, n + 3 * i + c)
        const value = 0.9 * latent[i] * mixes[c] + blend * 0.7 * field[(i + 31 * c) % n] + noise
        pixels[3 * i + c] = Math.max(0, Math.min(255, Math.round(255 / (1 + Math.exp(-value)))))
      }
    }
    return { width: SIZE, height: SIZE, pixels }
  }
}

const REGISTRY: Record<string, () => Backend> = {
  synthetic: () => new SyntheticBackend(),
}

export function loadBackend(model: string): Backend {
  const factory = REGISTRY[model]
  if (!factory) {
    throw new Error(`model ${JSON.stringify(model)} is not available (known: ${Object.keys(REGISTRY).join(', ')})`)
  }
  return factory()
}

// --- PPM (P6) image files: binary, dependency-free, deterministic ---

export function encodePpm(image: RenderedImage): Buffer {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, 'ascii')
  return Buffer.concat([header, Buffer.from(image.pixels)])
}

export function decodePpm(raw: Buffer): RenderedImage {
  const text = raw.subarray(0, 32).toString('ascii')
  const match = /^P6\n(\d+) (\d+)\n255\n/.exec(text)
  if (!match) throw new Error('not a P6 PPM written by this adapter')
  const width = Number(match[1])
  const height = Number(match[2])
  const offset = match[0].length
  const pixels = new Uint8Array(raw.subarray(offset, offset + 3 * width * height))
  if (pixels.length !== 3 * width * height) throw new Error('truncated PPM payload')
  return { width, height, pixels }
}

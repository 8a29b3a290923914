/** Per-image artifact extraction.
 *
 * Every extractor is a pure function of the image file, so artifacts are
 * reproducible from the corpus alone. The synthetic extractors mirror
 * the real pipeline's shapes: multi-layer spatial feature maps, a pooled
 * embedding vector, a binary object mask, a normalized depth map,
 * OCR-style text boxes, and a preference score.
 */

import { RenderedImage } from './backend.js'
import { hashString, uniform } from './rng.js'
import { TensorBlob, tensorFromValues } from './tensor.js'

export const FEATURE_LAYERS = ['synthA', 'synthB'] as const

export interface OcrBoxJson {
  x0: number
  y0: number
  x1: number
  y1: number
  text: string
  confidence: number
}

function channel(image: RenderedImage, c: number, x: number, y: number): number {
  return image.pixels[3 * (y * image.width + x) + c] / 255
}

function luminance(image: RenderedImage, x: number, y: number): number {
  return 0.299 * channel(image, 0, x, y) + 0.587 * channel(image, 1, x, y) + 0.114 * channel(image, 2, x, y)
}

function pooled(image: RenderedImage, factor: number, fn: (x: number, y: number) => number): number[] {
  const w = image.width / factor
  const h = image.height / factor
  const out: number[] = []
  for (let py = 0; py < h; py++) {
    for (let px = 0; px < w; px++) {
      let acc = 0
      for (let dy = 0; dy < factor; dy++) {
        for (let dx = 0; dx < factor; dx++) acc += fn(px * factor + dx, py * factor + dy)
      }
      out.push(acc / (factor * factor))
    }
  }
  return out
}

/** Layer synthA: 4 x (H/2) x (W/2): pooled luminance, red-green
 * opponency, and horizontal/vertical gradients. */
export function featureMapA(image: RenderedImage): TensorBlob {
  const h = image.height / 2
  const w = image.width / 2
  const lum = pooled(image, 2, (x, y) => luminance(image, x, y))
  const rg = pooled(image, 2, (x, y) => channel(image, 0, x, y) - channel(image, 1, x, y))
  const gx = pooled(image, 2, (x, y) => (x + 1 < image.width ? luminance(image, x + 1, y) - luminance(image, x, y) : 0))
  const gy = pooled(image, 2, (x, y) => (y + 1 < image.height ? luminance(image, x, y + 1) - luminance(image, x, y) : 0))
  return tensorFromValues([4, h, w], [...lum, ...rg, ...gx, ...gy])
}

/** Layer synthB: 3 x (H/4) x (W/4): coarser RGB pools. */
export function featureMapB(image: RenderedImage): TensorBlob {
  const h = image.height / 4
  const w = image.width / 4
  const channels: number[] = []
  for (let c = 0; c < 3; c++) channels.push(...pooled(image, 4, (x, y) => channel(image, c, x, y)))
  return tensorFromValues([3, h, w], channels)
}

/** 16-dimensional pooled embedding: per-channel statistics plus global
 * luminance/gradient summaries (the stand-in for a pooling-layer
 * embedding network output). */
export function pooledEmbedding(image: RenderedImage): TensorBlob {
  const values: number[] = []
  const n = image.width * image.height
  for (let c = 0; c < 3; c++) {
    let sum = 0
    let sumSq = 0
    let min = Infinity
    let max = -Infinity
    for (let y = 0; y < image.height; y++) {
      for (let x = 0; x < image.width; x++) {
        const v = channel(image, c, x, y)
        sum += v
        sumSq += v * v
        min = Math.min(min, v)
        max = Math.max(max, v)
      }
    }
    const mean = sum / n
    values.push(mean, Math.sqrt(Math.max(sumSq / n - mean * mean, 0)), min, max)
  }
  let lumSum = 0
  let lumSq = 0
  let gxSum = 0
  let gySum = 0
  for (let y = 0; y < image.height; y++) {
    for (let x = 0; x < image.width; x++) {
      const v = luminance(image, x, y)
      lumSum += v
      lumSq += v * v
      if (x + 1 < image.width) gxSum += Math.abs(luminance(image, x + 1, y) - v)
      if (y + 1 < image.height) gySum += Math.abs(luminance(image, x, y + 1) - v)
    }
  }
  const lumMean = lumSum / n
  values.push(lumMean, Math.sqrt(Math.max(lumSq / n - lumMean * lumMean, 0)), gxSum / n, gySum / n)
  return tensorFromValues([16], values)
}

/** Binary object mask: pixels brighter than the mean luminance. Returns
 * null when nothing exceeds the threshold (no detected object). */
export function objectMask(image: RenderedImage): TensorBlob | null {
  const n = image.width * image.height
  const lum = new Float64Array(n)
  let mean = 0
  for (let y = 0; y < image.height; y++) {
    for (let x = 0; x < image.width; x++) {
      lum[y * image.width + x] = luminance(image, x, y)
      mean += lum[y * image.width + x]
    }
  }
  mean /= n
  const mask = new Float32Array(n)
  let count = 0
  // epsilon so a constant image (mean == value up to summation rounding)
  // yields an empty mask rather than an all-ones one
  for (let i = 0; i < n; i++) {
    if (lum[i] > mean + 1e-9) {
      mask[i] = 1
      count++
    }
  }
  if (count === 0) return null
  return { shape: [image.height, image.width], data: mask }
}

/** Depth map: min-max-normalized distance from the luminance-weighted
 * centroid (bright regions read as near). */
export function depthMap(image: RenderedImage): TensorBlob {
  const w = image.width
  const h = image.height
  let cx = 0
  let cy = 0
  let total = 0
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const v = luminance(image, x, y) + 1e-9
      cx += x * v
      cy += y * v
      total += v
    }
  }
  cx /= total
  cy /= total
  const raw = new Float64Array(w * h)
  let min = Infinity
  let max = -Infinity
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const d = Math.hypot(x - cx, y - cy) + 0.5 * (1 - luminance(image, x, y))
      raw[y * w + x] = d
      min = Math.min(min, d)
      max = Math.max(max, d)
    }
  }
  const scale = max > min ? max - min : 1
  const data = new Float32Array(w * h)
  for (let i = 0; i < raw.length; i++) data[i] = (raw[i] - min) / scale
  return { shape: [h, w], data }
}

const OCR_WORDS = ['sale', 'open', 'stop', 'menu', 'exit']

/** Pseudo-OCR: up to two boxes derived deterministically from the image
 * bytes, confidence spread over [0.3, 1). */
export function ocrBoxes(imageBytes: Buffer): OcrBoxJson[] {
  const key = hashString(imageBytes.toString('base64'))
  const count = Number(key % 3n)
  const boxes: OcrBoxJson[] = []
  for (let b = 0; b < count; b++) {
    const u = (k: number) => uniform(key, 8 * b + k)
    const xs = [u(0), u(1)].sort((p, q) => p - q)
    const ys = [u(2), u(3)].sort((p, q) => p - q)
    if (xs[1] - xs[0] < 0.02 || ys[1] - ys[0] < 0.02) continue
    boxes.push({
      x0: xs[0],
      y0: ys[0],
      x1: xs[1],
      y1: ys[1],
      text: OCR_WORDS[Number((key >> BigInt(8 * b)) % BigInt(OCR_WORDS.length))],
      confidence: 0.3 + 0.7 * u(4),
    })
  }
  return boxes
}

/** Preference score in a plausible human-preference band (~0.25). */
export function preferenceScore(image: RenderedImage): number {
  let lum = 0
  const n = image.width * image.height
  for (let y = 0; y < image.height; y++) {
    for (let x = 0; x < image.width; x++) lum += luminance(image, x, y)
  }
  return 0.25 + 0.05 * (lum / n - 0.5)
}

/** Deterministic per-seed random numbers (SplitMix64 over BigInt).
 *
 * Draw k of the stream for `seed` is a pure function of (seed, k), which
 * is what lets the test suite re-derive any image from the seed recorded
 * in the manifest.
 */

const MASK = 0xffffffffffffffffn
const PHI = 0x9e3779b97f4a7c15n
const MIX_A = 0xbf58476d1ce4e5b9n
const MIX_B = 0x94d049bb133111ebn

function mix64(z: bigint): bigint {
  z &= MASK
  z ^= z >> 30n
  z = (z * MIX_A) & MASK
  z ^= z >> 27n
  z = (z * MIX_B) & MASK
  z ^= z >> 31n
  return z
}

export function rawDraw(seed: number | bigint, k: number): bigint {
  const base = mix64(BigInt(seed) & MASK)
  return mix64((base + (BigInt(k) + 1n) * PHI) & MASK)
}

/** Uniform in (0, 1], 53-bit resolution. */
export function uniform(seed: number | bigint, k: number): number {
  return (Number(rawDraw(seed, k) >> 11n) + 1) * 2 ** -53
}

/** Standard normal via Box-Muller on consecutive uniform pairs. */
export function normal(seed: number | bigint, k: number): number {
  const pair = Math.floor(k / 2)
  const u1 = uniform(seed, 2 * pair)
  const u2 = uniform(seed, 2 * pair + 1)
  const r = Math.sqrt(-2 * Math.log(u1))
  const theta = 2 * Math.PI * u2
  return k % 2 === 0 ? r * Math.cos(theta) : r * Math.sin(theta)
}

export function normals(seed: number | bigint, start: number, count: number): Float64Array {
  const out = new Float64Array(count)
  for (let i = 0; i < count; i++) out[i] = normal(seed, start + i)
  return out
}

/** Stable 64-bit hash of a string (for prompt conditioning). */
export function hashString(text: string): bigint {
  let h = 0xcbf29ce484222325n // FNV-1a offset basis
  for (const ch of Buffer.from(text, 'utf-8')) {
    h ^= BigInt(ch)
    h = (h * 0x100000001b3n) & MASK
  }
  return mix64(h)
}

/** The seedscope binary tensor container.
 *
 * Layout: magic "SDLB0001" (8 bytes), u32 little-endian header length,
 * UTF-8 JSON header {"dtype":"f32","shape":[...]} (that exact key order,
 * no whitespace), then the raw float32 little-endian row-major payload.
 * The header serialization matches the primary toolkit's canonical form
 * byte for byte, so read/rewrite round-trips are bit-exact across both
 * implementations.
 */

const MAGIC = Buffer.from('SDLB0001', 'ascii')

export interface TensorBlob {
  shape: number[]
  /** row-major float32 values (stored at float32 precision) */
  data: Float32Array
}

function elementCount(shape: number[]): number {
  if (shape.length === 0) throw new Error('shape must have at least one dimension')
  let n = 1
  for (const d of shape) {
    if (!Number.isInteger(d) || d <= 0) throw new Error(`shape dims must be positive integers, got ${shape}`)
    n *= d
  }
  return n
}

export function encodeTensor(blob: TensorBlob): Buffer {
  const count = elementCount(blob.shape)
  if (blob.data.length !== count) {
    throw new Error(`payload has ${blob.data.length} values, shape ${blob.shape} requires ${count}`)
  }
  const header = Buffer.from(JSON.stringify({ dtype: 'f32', shape: blob.shape }), 'utf-8')
  const out = Buffer.alloc(12 + header.length + 4 * count)
  MAGIC.copy(out, 0)
  out.writeUInt32LE(header.length, 8)
  header.copy(out, 12)
  const view = new DataView(out.buffer, out.byteOffset + 12 + header.length)
  for (let i = 0; i < count; i++) view.setFloat32(4 * i, blob.data[i], true)
  return out
}

export function decodeTensor(raw: Buffer): TensorBlob {
  if (raw.length < 12 || !raw.subarray(0, 8).equals(MAGIC)) throw new Error('bad magic')
  const headerLen = raw.readUInt32LE(8)
  const header = JSON.parse(raw.subarray(12, 12 + headerLen).toString('utf-8'))
  if (header.dtype !== 'f32') throw new Error(`unsupported dtype ${header.dtype}`)
  const shape: number[] = header.shape
  const count = elementCount(shape)
  const payload = raw.subarray(12 + headerLen)
  if (payload.length < 4 * count) throw new Error('truncated payload')
  if (payload.length > 4 * count) throw new Error('trailing bytes after payload')
  const view = new DataView(raw.buffer, raw.byteOffset + 12 + headerLen, 4 * count)
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = view.getFloat32(4 * i, true)
  return { shape, data }
}

export function tensorFromValues(shape: number[], values: ArrayLike<number>): TensorBlob {
  return { shape, data: Float32Array.from(values) }
}

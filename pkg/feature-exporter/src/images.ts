import { promises as fs } from 'fs'
import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export interface RawImage {
  width: number
  height: number
  /** packed RGB, row-major, 3 bytes per pixel */
  data: Uint8Array
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47])
const JPEG_MAGIC = Buffer.from([0xff, 0xd8])

function stripAlpha(rgba: Uint8Array, pixels: number): Uint8Array {
  const rgb = new Uint8Array(pixels * 3)
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = rgba[i * 4]
    rgb[i * 3 + 1] = rgba[i * 4 + 1]
    rgb[i * 3 + 2] = rgba[i * 4 + 2]
  }
  return rgb
}

/** Decode a PNG or JPEG file to packed RGB; throws on anything unreadable. */
export async function readImage(file: string): Promise<RawImage> {
  const buffer = await fs.readFile(file)
  if (buffer.subarray(0, 4).equals(PNG_MAGIC)) {
    const png = PNG.sync.read(buffer)
    return {
      width: png.width,
      height: png.height,
      data: stripAlpha(png.data, png.width * png.height),
    }
  }
  if (buffer.subarray(0, 2).equals(JPEG_MAGIC)) {
    const decoded = jpeg.decode(buffer, { useTArray: true })
    return {
      width: decoded.width,
      height: decoded.height,
      data: stripAlpha(decoded.data, decoded.width * decoded.height),
    }
  }
  throw new Error('not a PNG or JPEG file')
}

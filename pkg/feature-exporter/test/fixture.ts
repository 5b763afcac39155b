import * as tf from '@tensorflow/tfjs'
import { promises as fs } from 'fs'
import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

import { diskSaveHandler } from '../src/model.js'

/** Deterministic 32-bit PRNG so fixture weights and pixels never drift. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

export const FIXTURE_LAYER = 'features'
export const FIXTURE_DIM = 6

/** Tiny seeded classification CNN; the 'features' layer is 6 units wide. */
export async function saveFixtureModel(dir: string, seed = 7): Promise<void> {
  const model = tf.sequential({
    layers: [
      tf.layers.conv2d({
        filters: 4,
        kernelSize: 3,
        padding: 'same',
        activation: 'relu',
        inputShape: [16, 16, 3],
        name: 'conv',
      }),
      tf.layers.maxPooling2d({ poolSize: 2, name: 'pool' }),
      tf.layers.flatten({ name: 'flat' }),
      tf.layers.dense({ units: FIXTURE_DIM, activation: 'relu', name: FIXTURE_LAYER }),
      tf.layers.dense({ units: 3, activation: 'softmax', name: 'logits' }),
    ],
  })
  const rng = mulberry32(seed)
  model.setWeights(
    model.getWeights().map(w => {
      const values = Float32Array.from({ length: w.size }, () => rng() - 0.5)
      return tf.tensor(values, w.shape)
    }),
  )
  await model.save(diskSaveHandler(dir))
  model.dispose()
}

function randomRgba(seed: number, width: number, height: number): Uint8Array {
  const rng = mulberry32(seed)
  const data = new Uint8Array(width * height * 4)
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = Math.floor(rng() * 256)
    data[i * 4 + 1] = Math.floor(rng() * 256)
    data[i * 4 + 2] = Math.floor(rng() * 256)
    data[i * 4 + 3] = 255
  }
  return data
}

export async function writePng(file: string, seed: number, width = 20, height = 14): Promise<void> {
  const png = new PNG({ width, height })
  randomRgba(seed, width, height).forEach((v, i) => {
    png.data[i] = v
  })
  await fs.writeFile(file, PNG.sync.write(png))
}

export async function writeJpeg(file: string, seed: number, width = 24, height = 18): Promise<void> {
  const encoded = jpeg.encode({ data: randomRgba(seed, width, height), width, height }, 90)
  await fs.writeFile(file, encoded.data)
}

/** Right extension, wrong bytes: must be skipped, not exported. */
export async function writeCorrupt(file: string): Promise<void> {
  await fs.writeFile(file, 'this is not an image\n')
}

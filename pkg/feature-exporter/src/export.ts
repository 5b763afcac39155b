import * as tf from '@tensorflow/tfjs'
import { promises as fs } from 'fs'

import { readImage, RawImage } from './images.js'
import { ExportManifest } from './manifest.js'
import { loadFeatureModel } from './model.js'

export class ExportError extends Error {}

export interface SkipRecord {
  id: string
  path: string
  reason: string
}

export interface ExportResult {
  outputPath: string
  sidecarPath: string
  dimension: number
  exported: number
  skipped: SkipRecord[]
}

function preprocess(raw: RawImage, height: number, width: number): tf.Tensor4D {
  return tf.tidy(() => {
    const pixels = tf
      .tensor3d(Float32Array.from(raw.data), [raw.height, raw.width, 3])
      .div<tf.Tensor3D>(255)
    return tf.image.resizeBilinear(pixels, [height, width]).expandDims<tf.Tensor4D>(0)
  })
}

/**
 * Run the descriptor layer over every readable image and write the feature
 * file: header "n <dimension>", then one "<id> <v1> ... <vn>" line per image
 * in manifest order. Unreadable images are skipped with a warning and listed
 * in the sidecar report next to the output.
 */
export async function exportFeatures(manifest: ExportManifest): Promise<ExportResult> {
  const batchSize = manifest.batchSize ?? 16
  if (batchSize < 1) {
    throw new ExportError(`batch size must be >= 1, got ${batchSize}`)
  }
  for (const entry of manifest.images) {
    // the feature file is space-delimited, so ids cannot contain whitespace
    if (/\s/.test(entry.id)) {
      throw new ExportError(`image id ${JSON.stringify(entry.id)} contains whitespace`)
    }
  }
  await tf.setBackend('cpu')
  await tf.ready()
  const net = await loadFeatureModel(manifest.model, manifest.layer)

  const readable: Array<{ id: string; path: string; raw: RawImage }> = []
  const skipped: SkipRecord[] = []
  for (const entry of manifest.images) {
    try {
      readable.push({ ...entry, raw: await readImage(entry.path) })
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      console.warn(`warning: skipping ${entry.path}: ${reason}`)
      skipped.push({ id: entry.id, path: entry.path, reason })
    }
  }

  const lines = [`n ${net.dimension}`]
  for (let start = 0; start < readable.length; start += batchSize) {
    const batch = readable.slice(start, start + batchSize)
    const output = tf.tidy(() => {
      const inputs = batch.map(({ raw }) => preprocess(raw, net.inputHeight, net.inputWidth))
      const features = net.model.predict(tf.concat(inputs, 0)) as tf.Tensor
      return features.reshape([batch.length, net.dimension])
    })
    const values = (await output.data()) as Float32Array
    output.dispose()
    batch.forEach(({ id }, row) => {
      const vector = values.subarray(row * net.dimension, (row + 1) * net.dimension)
      lines.push(`${id} ${Array.from(vector).join(' ')}`)
    })
  }
  net.model.dispose()

  if (readable.length === 0) {
    throw new ExportError('no input image could be read; nothing to export')
  }
  await fs.writeFile(manifest.output, lines.join('\n') + '\n')
  const sidecarPath = `${manifest.output}.skipped.json`
  await fs.writeFile(sidecarPath, JSON.stringify(skipped, null, 2) + '\n')
  return {
    outputPath: manifest.output,
    sidecarPath,
    dimension: net.dimension,
    exported: readable.length,
    skipped,
  }
}

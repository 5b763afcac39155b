import * as tf from '@tensorflow/tfjs'
import { promises as fs } from 'fs'
import * as path from 'path'

/** Loads model.json + weight binaries from a local directory (no tfjs-node). */
export function diskLoadHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const raw = JSON.parse(await fs.readFile(path.join(dir, 'model.json'), 'utf8'))
      const manifest = raw.weightsManifest as Array<{ paths: string[]; weights: tf.io.WeightsManifestEntry[] }>
      const buffers: Buffer[] = []
      const weightSpecs: tf.io.WeightsManifestEntry[] = []
      for (const group of manifest) {
        weightSpecs.push(...group.weights)
        for (const p of group.paths) {
          buffers.push(await fs.readFile(path.join(dir, p)))
        }
      }
      const joined = Buffer.concat(buffers)
      const weightData = joined.buffer.slice(
        joined.byteOffset,
        joined.byteOffset + joined.byteLength,
      )
      return {
        modelTopology: raw.modelTopology,
        format: raw.format,
        generatedBy: raw.generatedBy,
        convertedBy: raw.convertedBy,
        weightSpecs,
        weightData,
      }
    },
  }
}

/** Counterpart used by the tests to save the seeded fixture network. */
export function diskSaveHandler(dir: string): tf.io.IOHandler {
  return tf.io.withSaveHandler(async artifacts => {
    await fs.mkdir(dir, { recursive: true })
    const parts = Array.isArray(artifacts.weightData)
      ? artifacts.weightData
      : [artifacts.weightData as ArrayBuffer]
    const weights = Buffer.concat(parts.map(p => Buffer.from(p)))
    await fs.writeFile(path.join(dir, 'weights.bin'), weights)
    await fs.writeFile(
      path.join(dir, 'model.json'),
      JSON.stringify(
        {
          modelTopology: artifacts.modelTopology,
          format: artifacts.format,
          generatedBy: artifacts.generatedBy,
          convertedBy: artifacts.convertedBy ?? null,
          weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
        },
        null,
        2,
      ),
    )
    return {
      modelArtifactsInfo: {
        dateSaved: new Date(),
        modelTopologyType: 'JSON',
        weightDataBytes: weights.byteLength,
      },
    }
  })
}

export interface FeatureModel {
  model: tf.LayersModel
  inputHeight: number
  inputWidth: number
  /** flattened width of the descriptor layer's output */
  dimension: number
}

/** Load the network and truncate it at the named descriptor layer. */
export async function loadFeatureModel(modelDir: string, layerName: string): Promise<FeatureModel> {
  const base = await tf.loadLayersModel(diskLoadHandler(modelDir))
  let layer: tf.layers.Layer
  try {
    layer = base.getLayer(layerName)
  } catch {
    const names = base.layers.map(l => l.name).join(', ')
    throw new Error(`model has no layer '${layerName}' (layers: ${names})`)
  }
  const truncated = tf.model({ inputs: base.inputs, outputs: layer.output })
  const inputShape = truncated.inputs[0].shape // [batch, H, W, 3]
  const outputShape = truncated.outputs[0].shape
  const dimension = outputShape.slice(1).reduce<number>((a, b) => a * (b ?? 1), 1)
  return {
    model: truncated,
    inputHeight: inputShape[1] as number,
    inputWidth: inputShape[2] as number,
    dimension,
  }
}

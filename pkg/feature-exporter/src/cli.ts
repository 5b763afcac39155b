#!/usr/bin/env node
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { ExportError, exportFeatures } from './export.js'
import { collectImages, IdScheme } from './manifest.js'

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName('feature-export')
    .usage('$0 --input-dir <dir> --model <dir> --layer <name> --out <file>')
    .option('input-dir', {
      type: 'string',
      demandOption: true,
      describe: 'directory scanned recursively for .png/.jpg/.jpeg images',
    })
    .option('model', {
      type: 'string',
      demandOption: true,
      describe: 'directory holding a saved classification network (model.json + weights)',
    })
    .option('layer', {
      type: 'string',
      demandOption: true,
      describe: 'name of the layer whose activations become the feature vector',
    })
    .option('out', {
      type: 'string',
      demandOption: true,
      describe: 'feature file to write; a .skipped.json report lands beside it',
    })
    .option('batch-size', {
      type: 'number',
      default: 16,
      describe: 'images per forward pass',
    })
    .option('ids', {
      choices: ['stem', 'relative'] as const,
      default: 'stem' as IdScheme,
      describe: 'derive record ids from file stems or slash-joined relative paths',
    })
    .strict()
    .fail((msg, err) => {
      throw err ?? new ExportError(msg)
    })
    .parse()

  try {
    const images = collectImages(args['input-dir'], args.ids)
    const result = await exportFeatures({
      images,
      model: args.model,
      layer: args.layer,
      output: args.out,
      batchSize: args['batch-size'],
    })
    console.log(
      `exported ${result.exported} vectors of dimension ${result.dimension} to ${result.outputPath}`,
    )
    if (result.skipped.length > 0) {
      console.log(`skipped ${result.skipped.length} unreadable, see ${result.sidecarPath}`)
    }
    return 0
  } catch (err) {
    if (err instanceof ExportError && err.message.startsWith('no input image')) {
      console.error(`error: ${err.message}`)
      return 1
    }
    const reason = err instanceof Error ? err.message : String(err)
    console.error(`error: ${reason}`)
    return 2
  }
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js') ?? false
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}

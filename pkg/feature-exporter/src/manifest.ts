import { readdirSync } from 'fs'
import * as path from 'path'

export interface ImageEntry {
  id: string
  path: string
}

/** Everything one export run needs; recorded next to the output for provenance. */
export interface ExportManifest {
  images: ImageEntry[]
  /** directory holding the saved network (model.json + weight binaries) */
  model: string
  /** layer whose activations become the descriptor */
  layer: string
  output: string
  batchSize?: number
}

export type IdScheme = 'stem' | 'relative'

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

function walk(dir: string): string[] {
  const files: string[] = []
  for (const entry of readdirSync(dir, { withFileTypes: true })) {
    const full = path.join(dir, entry.name)
    if (entry.isDirectory()) {
      files.push(...walk(full))
    } else if (IMAGE_EXTENSIONS.has(path.extname(entry.name).toLowerCase())) {
      files.push(full)
    }
  }
  return files
}

/**
 * All images under a directory, sorted by path so runs are reproducible.
 * `stem` ids use the file name without extension, `relative` the
 * slash-separated path relative to the input directory.
 */
export function collectImages(dir: string, scheme: IdScheme = 'stem'): ImageEntry[] {
  const files = walk(dir).sort()
  const entries = files.map(file => ({
    id:
      scheme === 'stem'
        ? path.basename(file, path.extname(file))
        : path.relative(dir, file).split(path.sep).join('/'),
    path: file,
  }))
  const seen = new Map<string, string>()
  for (const entry of entries) {
    const previous = seen.get(entry.id)
    if (previous !== undefined) {
      throw new Error(
        `duplicate image id '${entry.id}' (${previous} vs ${entry.path}); ` +
          `use --ids relative to disambiguate`,
      )
    }
    seen.set(entry.id, entry.path)
  }
  return entries
}

/**
 * Export pipeline: scan a dataset directory with class subfolders, run every
 * image through the hooked classifier and write one FARC record per image.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { FarcRecord, encodeFarc } from './farc';
import { hookFeatureModel, loadClassifier, preprocessingFor } from './model';
import { decodePpm } from './ppm';

export interface ExportSpec {
  model: string;     // zoo name or checkpoint path
  dataDir: string;   // class subfolders holding .ppm images
  size: number;      // resize target in pixels
  outPath: string;
}

export interface DatasetEntry {
  file: string;
  label: number;
  className: string;
}

export function scanDataset(dataDir: string): DatasetEntry[] {
  if (!fs.existsSync(dataDir) || !fs.statSync(dataDir).isDirectory()) {
    throw new Error(`dataset directory not found: ${dataDir}`);
  }
  const classes = fs.readdirSync(dataDir)
    .filter((d) => fs.statSync(path.join(dataDir, d)).isDirectory())
    .sort();
  if (classes.length === 0) {
    throw new Error(`dataset is empty: no class subfolders in ${dataDir}`);
  }
  const entries: DatasetEntry[] = [];
  classes.forEach((cls, label) => {
    const files = fs.readdirSync(path.join(dataDir, cls))
      .filter((f) => f.endsWith('.ppm'))
      .sort();
    for (const f of files) {
      entries.push({ file: path.join(dataDir, cls, f), label, className: cls });
    }
  });
  if (entries.length === 0) {
    throw new Error(`dataset is empty: no .ppm images under ${dataDir}`);
  }
  return entries;
}

export async function exportFeatures(spec: ExportSpec): Promise<number> {
  const base = await loadClassifier(spec.model);
  const hooked = hookFeatureModel(base);
  const prep = preprocessingFor(spec.model, spec.size);
  const entries = scanDataset(spec.dataDir);

  const records: FarcRecord[] = [];
  for (const entry of entries) {
    let img;
    try {
      img = decodePpm(fs.readFileSync(entry.file));
    } catch (err) {
      throw new Error(`unreadable image ${entry.file}: ${(err as Error).message}`);
    }
    const [spatial, logits] = tf.tidy(() => {
      let x = tf.tensor3d(img.data, [img.height, img.width, 3]);
      if (img.height !== prep.resize || img.width !== prep.resize) {
        x = tf.image.resizeBilinear(x as tf.Tensor3D, [prep.resize, prep.resize]);
      }
      x = x.sub(prep.mean).div(prep.std);
      const out = hooked.predict(x.expandDims(0)) as tf.Tensor[];
      return [out[0].squeeze([0]), out[1].squeeze([0])] as const;
    });
    const shape = spatial.shape as [number, number, number];
    records.push({
      label: entry.label,
      logits: new Float32Array(await logits.data()),
      features: new Float32Array(await spatial.data()),
      height: shape[0],
      width: shape[1],
      depth: shape[2],
    });
    spatial.dispose();
    logits.dispose();
  }

  fs.writeFileSync(spec.outPath, encodeFarc(records));
  fs.writeFileSync(spec.outPath + '.json', JSON.stringify({
    model: spec.model,
    preprocessing: prep,
    records: records.length,
    classes: [...new Set(entries.map((e) => e.className))],
  }, null, 2) + '\n');
  return records.length;
}

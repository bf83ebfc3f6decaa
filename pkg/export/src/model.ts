/**
 * Classifier loading and feature-hook construction.
 *
 * Models are tfjs Layers checkpoints on disk (a model.json plus weight
 * shards). The hook point is the last layer with a spatial 4-D output; the
 * export model maps an input batch to [spatial features, logits].
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

/** Preprocessing applied before inference, recorded next to each archive. */
export interface Preprocessing {
  resize: number;
  mean: number;
  std: number;
}

/** Known zoo identifiers; anything else must be a checkpoint path. */
export const MODEL_ZOO: Record<string, Preprocessing> = {
  'tfjs-mobilenet': { resize: 224, mean: 0.5, std: 0.5 },
};

function diskIoHandler(modelJsonPath: string): tf.io.IOHandler {
  const dir = path.dirname(modelJsonPath);
  return {
    load: async () => {
      const manifest = JSON.parse(fs.readFileSync(modelJsonPath, 'utf-8'));
      const specs: tf.io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of manifest.weightsManifest) {
        specs.push(...group.weights);
        for (const p of group.paths) {
          buffers.push(fs.readFileSync(path.join(dir, p)));
        }
      }
      const weightData = Buffer.concat(buffers);
      return {
        modelTopology: manifest.modelTopology,
        weightSpecs: specs,
        weightData: weightData.buffer.slice(
          weightData.byteOffset, weightData.byteOffset + weightData.byteLength),
      };
    },
  };
}

export async function loadClassifier(modelId: string): Promise<tf.LayersModel> {
  if (MODEL_ZOO[modelId]) {
    throw new Error(
      `zoo model '${modelId}' is not bundled; pass a checkpoint path ` +
      '(a directory containing model.json or the model.json itself)');
  }
  let jsonPath = modelId;
  if (fs.existsSync(modelId) && fs.statSync(modelId).isDirectory()) {
    jsonPath = path.join(modelId, 'model.json');
  }
  if (!fs.existsSync(jsonPath)) {
    throw new Error(`unknown model '${modelId}': no such checkpoint`);
  }
  return tf.loadLayersModel(diskIoHandler(jsonPath));
}

/** Sub-model emitting [last spatial feature map, logits]. */
export function hookFeatureModel(model: tf.LayersModel): tf.LayersModel {
  let spatial: tf.SymbolicTensor | null = null;
  for (const layer of model.layers) {
    const out = layer.output as tf.SymbolicTensor;
    if (out.shape.length === 4) {
      spatial = out;
    }
  }
  if (spatial === null) {
    throw new Error('hook mismatch: model has no spatial 4-D layer output');
  }
  return tf.model({
    inputs: model.inputs,
    outputs: [spatial, model.outputs[0] as tf.SymbolicTensor],
  });
}

export function preprocessingFor(modelId: string, resize: number): Preprocessing {
  const zoo = MODEL_ZOO[modelId];
  if (zoo) {
    return { ...zoo, resize };
  }
  return { resize, mean: 0.0, std: 1.0 };
}

/** Export a trained tfjs model to the inference engine's manifest+blob
 *  format: a JSON manifest describing the layer stack plus a little-endian
 *  float32 blob holding, per parameterized layer, weights then biases.
 *
 *  Axis conventions differ between the two worlds and are converted here:
 *    - tfjs conv kernels are [kh, kw, inC, outC]; the engine wants
 *      [outC, inC, kh, kw].
 *    - tfjs flattens activations in [h, w, c] order; the engine flattens
 *      [c, h, w].  Dense kernels that follow a flatten are re-indexed so
 *      both runtimes compute the same logits.
 */
import { createHash } from 'node:crypto';
import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import * as tf from '@tensorflow/tfjs';

import { IMAGE_SIZE } from './dataset';

export class ExportError extends Error {}

export interface ExportBundle {
  manifestPath: string;
  blobPath: string;
}

interface LayerSpec {
  kind: string;
  [key: string]: unknown;
}

function convKernelToEngine(kernel: tf.Tensor): number[] {
  // [kh, kw, inC, outC] -> [outC, inC, kh, kw]
  return Array.from(kernel.transpose([3, 2, 0, 1]).dataSync());
}

function denseKernelToEngine(kernel: tf.Tensor, pre: number[] | null): number[] {
  // [in, out] -> [out, in]; if the input comes from flattening an
  // [h, w, c] activation, re-index to the engine's [c, h, w] order.
  const [inUnits, outUnits] = kernel.shape as [number, number];
  const data = kernel.dataSync();
  const out = new Array<number>(inUnits * outUnits);
  for (let o = 0; o < outUnits; o++) {
    for (let i = 0; i < inUnits; i++) {
      let tfIndex = i;
      if (pre) {
        const [h, w, c] = pre;
        const ch = Math.floor(i / (h * w));
        const y = Math.floor((i % (h * w)) / w);
        const x = i % w;
        tfIndex = (y * w + x) * c + ch;
      }
      out[o * inUnits + i] = data[tfIndex * outUnits + o];
    }
  }
  return out;
}

/** Walk the model's layers, emitting manifest entries and blob arrays. */
export function exportModel(model: tf.LayersModel, outDir: string): ExportBundle {
  const layers: LayerSpec[] = [];
  const arrays: number[][] = [];
  // [h, w, c] shape of the activation feeding the next layer
  let shape: number[] = [IMAGE_SIZE, IMAGE_SIZE, 1];
  let flattenedFrom: number[] | null = null;

  for (const layer of model.layers) {
    const cls = layer.getClassName();
    if (cls === 'Conv2D') {
      const cfg = layer.getConfig() as { padding: string; strides: number[] | number; activation: string };
      const [kernel, bias] = layer.getWeights();
      const [kh, kw, inC, outC] = kernel.shape as [number, number, number, number];
      const stride = Array.isArray(cfg.strides) ? cfg.strides[0] : cfg.strides;
      if (cfg.padding !== 'same' && cfg.padding !== 'valid') {
        throw new ExportError(`unsupported conv padding ${cfg.padding}`);
      }
      if (cfg.padding === 'same' && (kh % 2 === 0 || stride !== 1)) {
        throw new ExportError('same-padding export requires odd kernels and stride 1');
      }
      const pad = cfg.padding === 'same' ? (kh - 1) / 2 : 0;
      layers.push({ kind: 'conv2d', in_ch: inC, out_ch: outC, kh, kw, stride, padding: pad });
      arrays.push(convKernelToEngine(kernel), Array.from(bias.dataSync()));
      const h = Math.floor((shape[0] + 2 * pad - kh) / stride) + 1;
      const w = Math.floor((shape[1] + 2 * pad - kw) / stride) + 1;
      shape = [h, w, outC];
      if (cfg.activation === 'relu') {
        layers.push({ kind: 'relu' });
      } else if (cfg.activation !== 'linear') {
        throw new ExportError(`unsupported conv activation ${cfg.activation}`);
      }
    } else if (cls === 'MaxPooling2D') {
      const cfg = layer.getConfig() as { poolSize: number[]; strides: number[] };
      const [ph, pw] = cfg.poolSize;
      const stride = cfg.strides[0];
      layers.push({ kind: 'maxpool2d', kh: ph, kw: pw, stride });
      shape = [Math.floor((shape[0] - ph) / stride) + 1,
               Math.floor((shape[1] - pw) / stride) + 1,
               shape[2]];
    } else if (cls === 'Flatten') {
      layers.push({ kind: 'flatten' });
      flattenedFrom = shape;
      shape = [shape[0] * shape[1] * shape[2]];
    } else if (cls === 'Dense') {
      const cfg = layer.getConfig() as { activation: string };
      const [kernel, bias] = layer.getWeights();
      const [inUnits, outUnits] = kernel.shape as [number, number];
      layers.push({ kind: 'dense', in: inUnits, out: outUnits });
      arrays.push(denseKernelToEngine(kernel, flattenedFrom), Array.from(bias.dataSync()));
      flattenedFrom = null;
      shape = [outUnits];
      if (cfg.activation === 'softmax') {
        layers.push({ kind: 'softmax' });
      } else if (cfg.activation !== 'linear') {
        throw new ExportError(`unsupported dense activation ${cfg.activation}`);
      }
    } else {
      throw new ExportError(`unsupported layer type ${cls}`);
    }
  }
  if (layers[layers.length - 1]?.kind !== 'softmax') {
    throw new ExportError('model must end in softmax');
  }

  const floats = arrays.flat();
  const blob = Buffer.alloc(4 * floats.length);
  floats.forEach((v, i) => blob.writeFloatLE(Math.fround(v), 4 * i));

  mkdirSync(outDir, { recursive: true });
  const blobPath = join(outDir, 'model.bin');
  writeFileSync(blobPath, blob);
  const manifest = {
    format_version: 1,
    input_shape: [1, IMAGE_SIZE, IMAGE_SIZE],
    num_classes: shape[0],
    weights_file: 'model.bin',
    weights_sha256: createHash('sha256').update(blob).digest('hex'),
    layers,
  };
  const manifestPath = join(outDir, 'model.json');
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return { manifestPath, blobPath };
}

/** Write a [0,1] grayscale image as binary 8-bit PGM (P5). */
export function writePgm(pixels: Float32Array, path: string): void {
  const bytes = Buffer.alloc(pixels.length);
  for (let i = 0; i < pixels.length; i++) {
    bytes[i] = Math.round(Math.min(1, Math.max(0, pixels[i])) * 255);
  }
  const header = Buffer.from(`P5\n${IMAGE_SIZE} ${IMAGE_SIZE}\n255\n`, 'ascii');
  writeFileSync(path, Buffer.concat([header, bytes]));
}

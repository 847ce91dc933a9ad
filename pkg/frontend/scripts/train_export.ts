/** Train the tiny CNN on the synthetic glyph dataset and export everything
 *  the downstream test suite consumes:
 *    export/model.json + model.bin   -- manifest+blob model bundle
 *    export/golden.json + golden/    -- 10 probe images with expected outputs
 *    export/testset/                 -- the test split as PGM files + labels
 */
import { mkdirSync, writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import * as tf from '@tensorflow/tfjs';

import { IMAGE_SIZE, makeFixtureDataset } from '../src/dataset';
import { exportModel, writePgm } from '../src/exporter';
import { createModel, trainModel } from '../src/model';

const here = dirname(fileURLToPath(import.meta.url));
const outDir = join(here, '..', 'export');

async function main(): Promise<void> {
  const data = makeFixtureDataset(20240819, 2000, 200);
  const model = createModel();
  const accuracy = await trainModel(model, data);
  console.log(`test accuracy: ${(accuracy * 100).toFixed(1)}%`);
  if (accuracy < 0.9) {
    throw new Error('training did not reach 90% test accuracy; not exporting');
  }

  const bundle = exportModel(model, outDir);
  console.log(`wrote ${bundle.manifestPath}`);

  // golden probes: first 10 test images, expected outputs from this model
  mkdirSync(join(outDir, 'golden'), { recursive: true });
  const probes = [];
  for (let i = 0; i < 10; i++) {
    const ex = data.test[i];
    const name = `golden/probe_${String(i).padStart(2, '0')}.pgm`;
    writePgm(ex.pixels, join(outDir, name));
    const out = tf.tidy(() => {
      const x = tf.tensor4d(ex.pixels, [1, IMAGE_SIZE, IMAGE_SIZE, 1]);
      return (model.predict(x) as tf.Tensor).dataSync();
    });
    const output = Array.from(out);
    probes.push({
      image: name,
      output,
      top1: output.indexOf(Math.max(...output)),
    });
  }
  writeFileSync(join(outDir, 'golden.json'),
                JSON.stringify({ probes }, null, 2) + '\n');

  // full test split for downstream accuracy measurement
  mkdirSync(join(outDir, 'testset'), { recursive: true });
  const labels = [];
  for (let i = 0; i < data.test.length; i++) {
    const name = `test_${String(i).padStart(3, '0')}.pgm`;
    writePgm(data.test[i].pixels, join(outDir, 'testset', name));
    labels.push({ image: name, label: data.test[i].label });
  }
  writeFileSync(join(outDir, 'testset', 'labels.json'),
                JSON.stringify(labels, null, 2) + '\n');
  console.log(`wrote ${data.test.length} test images and golden set`);
}

main().catch((e) => {
  console.error(e);
  process.exit(1);
});

import * as tf from '@tensorflow/tfjs';

import { Dataset, Example, IMAGE_SIZE, NUM_CLASSES } from './dataset';

/** Tiny CNN restricted to the inference engine's layer vocabulary:
 *  conv2d(8x3x3, same) -> relu -> maxpool(2x2) -> flatten -> dense(10) -> softmax. */
export function createModel(): tf.Sequential {
  const model = tf.sequential();
  model.add(tf.layers.conv2d({
    inputShape: [IMAGE_SIZE, IMAGE_SIZE, 1],
    filters: 8,
    kernelSize: 3,
    strides: 1,
    padding: 'same',
    activation: 'relu',
    kernelInitializer: tf.initializers.glorotUniform({ seed: 7 }),
  }));
  model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }));
  model.add(tf.layers.flatten());
  model.add(tf.layers.dense({
    units: NUM_CLASSES,
    activation: 'softmax',
    kernelInitializer: tf.initializers.glorotUniform({ seed: 8 }),
  }));
  model.compile({
    optimizer: tf.train.adam(0.005),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  });
  return model;
}

export function toTensors(examples: Example[]): { xs: tf.Tensor4D; ys: tf.Tensor2D } {
  const n = examples.length;
  const xs = new Float32Array(n * IMAGE_SIZE * IMAGE_SIZE);
  const ys = new Float32Array(n * NUM_CLASSES);
  examples.forEach((ex, i) => {
    xs.set(ex.pixels, i * IMAGE_SIZE * IMAGE_SIZE);
    ys[i * NUM_CLASSES + ex.label] = 1;
  });
  return {
    xs: tf.tensor4d(xs, [n, IMAGE_SIZE, IMAGE_SIZE, 1]),
    ys: tf.tensor2d(ys, [n, NUM_CLASSES]),
  };
}

export async function trainModel(model: tf.Sequential, data: Dataset,
                                 epochs = 30): Promise<number> {
  const train = toTensors(data.train);
  const test = toTensors(data.test);
  await model.fit(train.xs, train.ys, {
    epochs,
    batchSize: 64,
    shuffle: false, // keep training order deterministic
    verbose: 0,
  });
  const evalResult = model.evaluate(test.xs, test.ys) as tf.Scalar[];
  const accuracy = (await evalResult[1].data())[0];
  tf.dispose([train.xs, train.ys, test.xs, test.ys, ...evalResult]);
  return accuracy;
}

/** Deterministic 10-class synthetic glyph dataset (28x28 grayscale).
 *
 *  Each image is a bright geometric glyph over a smooth textured
 *  background, with per-example translation jitter.  Pixels are quantized
 *  to k/255 at generation time so the dataset is exactly representable in
 *  8-bit image files.
 *
 *  The glyph is an *unreliable* cue: a fixed fraction of examples draw a
 *  wrong-class glyph while keeping the label.  The only fully reliable cue
 *  is a faint smooth per-class signature field added to every image, so a
 *  classifier that reaches high accuracy must rely on it.  That makes the
 *  trained model sensitive to small smooth perturbations -- the desk-scale
 *  stand-in for the non-robust features that make large vision models
 *  attackable.
 */
import { Rng } from './rng';

export const IMAGE_SIZE = 28;
export const NUM_CLASSES = 10;

export interface Example {
  /** Row-major 28*28 grayscale pixels in [0,1], each an exact k/255. */
  pixels: Float32Array;
  label: number;
}

export interface Dataset {
  train: Example[];
  test: Example[];
}

/** Fraction of examples whose glyph is drawn from a wrong class. */
export const WRONG_GLYPH_PROB = 0.8;
/** Peak amplitude of the per-class signature field. */
export const SIGNATURE_AMPLITUDE = 0.05;

function smoothField(rng: Rng, passes: number): Float32Array {
  const n = IMAGE_SIZE;
  let img = new Float32Array(n * n);
  for (let i = 0; i < img.length; i++) img[i] = rng.next();
  // box-blur passes with wrap-around, like a cheap Perlin field
  for (let pass = 0; pass < passes; pass++) {
    const out = new Float32Array(n * n);
    for (let y = 0; y < n; y++) {
      for (let x = 0; x < n; x++) {
        const up = ((y + n - 1) % n) * n + x;
        const down = ((y + 1) % n) * n + x;
        const left = y * n + ((x + n - 1) % n);
        const right = y * n + ((x + 1) % n);
        out[y * n + x] = (img[y * n + x] + img[up] + img[down] + img[left] + img[right]) / 5;
      }
    }
    img = out;
  }
  return img;
}

function smoothBackground(rng: Rng): Float32Array {
  const img = smoothField(rng, 3);
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of img) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const out = new Float32Array(img.length);
  for (let i = 0; i < img.length; i++) {
    out[i] = 0.1 + 0.35 * ((img[i] - lo) / (hi - lo));
  }
  return out;
}

function makeSignatures(): Float32Array[] {
  // zero-mean smooth fields, Gram-Schmidt orthogonalized so the class cues
  // do not overlap, then rescaled to peak amplitude 1
  const sigs: Float32Array[] = [];
  for (let label = 0; label < NUM_CLASSES; label++) {
    const rng = new Rng(0x5157ea00 + label);
    const img = smoothField(rng, 4);
    let mean = 0;
    for (const v of img) mean += v;
    mean /= img.length;
    const s = new Float32Array(img.length);
    for (let i = 0; i < img.length; i++) s[i] = img[i] - mean;
    for (const prev of sigs) {
      let dot = 0;
      let norm = 0;
      for (let i = 0; i < s.length; i++) {
        dot += s[i] * prev[i];
        norm += prev[i] * prev[i];
      }
      for (let i = 0; i < s.length; i++) s[i] -= (dot / norm) * prev[i];
    }
    sigs.push(s);
  }
  return sigs.map((s) => {
    let peak = 0;
    for (const v of s) peak = Math.max(peak, Math.abs(v));
    const out = new Float32Array(s.length);
    for (let i = 0; i < s.length; i++) out[i] = s[i] / peak;
    return out;
  });
}

/** Fixed orthogonal smooth signature field for one class, peak amplitude 1. */
export function classSignature(label: number): Float32Array {
  return SIGNATURES[label];
}

const SIGNATURES = makeSignatures();

/** Paint glyph pixel (x, y) if inside the canvas. */
function put(img: Float32Array, x: number, y: number, v: number): void {
  if (x >= 0 && x < IMAGE_SIZE && y >= 0 && y < IMAGE_SIZE) {
    img[y * IMAGE_SIZE + x] = Math.max(img[y * IMAGE_SIZE + x], v);
  }
}

/** Draw the glyph for one class, centered at (cx, cy). */
function drawGlyph(img: Float32Array, label: number, cx: number, cy: number, v: number): void {
  const r = 7;
  switch (label) {
    case 0: // horizontal bar
      for (let x = -r; x <= r; x++) for (let t = -1; t <= 1; t++) put(img, cx + x, cy + t, v);
      break;
    case 1: // vertical bar
      for (let y = -r; y <= r; y++) for (let t = -1; t <= 1; t++) put(img, cx + t, cy + y, v);
      break;
    case 2: // main diagonal
      for (let d = -r; d <= r; d++) for (let t = -1; t <= 1; t++) put(img, cx + d + t, cy + d, v);
      break;
    case 3: // anti-diagonal
      for (let d = -r; d <= r; d++) for (let t = -1; t <= 1; t++) put(img, cx - d + t, cy + d, v);
      break;
    case 4: // plus
      for (let d = -r; d <= r; d++) {
        for (let t = -1; t <= 1; t++) {
          put(img, cx + d, cy + t, v);
          put(img, cx + t, cy + d, v);
        }
      }
      break;
    case 5: // X
      for (let d = -r; d <= r; d++) {
        for (let t = -1; t <= 1; t++) {
          put(img, cx + d + t, cy + d, v);
          put(img, cx - d + t, cy + d, v);
        }
      }
      break;
    case 6: // square outline
      for (let d = -r; d <= r; d++) {
        for (let t = 0; t <= 1; t++) {
          put(img, cx + d, cy - r + t, v);
          put(img, cx + d, cy + r - t, v);
          put(img, cx - r + t, cy + d, v);
          put(img, cx + r - t, cy + d, v);
        }
      }
      break;
    case 7: // filled disc
      for (let y = -r; y <= r; y++) {
        for (let x = -r; x <= r; x++) {
          if (x * x + y * y <= (r - 2) * (r - 2)) put(img, cx + x, cy + y, v);
        }
      }
      break;
    case 8: // ring
      for (let y = -r; y <= r; y++) {
        for (let x = -r; x <= r; x++) {
          const d2 = x * x + y * y;
          if (d2 <= r * r && d2 >= (r - 2) * (r - 2)) put(img, cx + x, cy + y, v);
        }
      }
      break;
    case 9: // two horizontal bars
      for (let x = -r; x <= r; x++) {
        for (let t = -1; t <= 0; t++) {
          put(img, cx + x, cy - 4 + t, v);
          put(img, cx + x, cy + 4 + t, v);
        }
      }
      break;
    default:
      throw new Error(`unknown label ${label}`);
  }
}

function quantize(img: Float32Array): Float32Array {
  const out = new Float32Array(img.length);
  for (let i = 0; i < img.length; i++) {
    out[i] = Math.round(Math.min(1, Math.max(0, img[i])) * 255) / 255;
  }
  return out;
}

function makeExample(rng: Rng, label: number): Example {
  const img = smoothBackground(rng);
  const cx = 13 + rng.int(5) - 2; // jitter +-2
  const cy = 13 + rng.int(5) - 2;
  const v = rng.uniform(0.8, 1.0);
  // the glyph lies about the class on a fixed fraction of examples
  const glyph = rng.next() < WRONG_GLYPH_PROB ? rng.int(NUM_CLASSES) : label;
  drawGlyph(img, glyph, cx, cy, v);
  // background and glyph are smooth/structured and would otherwise drown
  // the faint class cue in-band; project them out of the cue subspace so
  // the signature is the only energy along its own direction
  for (const sig of SIGNATURES) {
    let dot = 0;
    let norm = 0;
    for (let i = 0; i < img.length; i++) {
      dot += img[i] * sig[i];
      norm += sig[i] * sig[i];
    }
    for (let i = 0; i < img.length; i++) img[i] -= (dot / norm) * sig[i];
  }
  const sig = SIGNATURES[label];
  for (let i = 0; i < img.length; i++) img[i] += SIGNATURE_AMPLITUDE * sig[i];
  return { pixels: quantize(img), label };
}

/** Deterministic train/test split: same seed, same bytes. */
export function makeFixtureDataset(seed: number, trainSize = 1000, testSize = 200): Dataset {
  const rng = new Rng(seed);
  const train: Example[] = [];
  const test: Example[] = [];
  for (let i = 0; i < trainSize; i++) train.push(makeExample(rng, i % NUM_CLASSES));
  for (let i = 0; i < testSize; i++) test.push(makeExample(rng, i % NUM_CLASSES));
  return { train, test };
}

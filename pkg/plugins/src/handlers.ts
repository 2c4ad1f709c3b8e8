/**
 * Reference task handlers.
 *
 * These are deterministic pixel-level scorers that exercise the full
 * protocol with real frame IO. They are stand-ins with sensible output
 * ranges, not reimplementations of the large models a production
 * deployment would wire in here (aesthetic predictors, self-supervised
 * embedders, OCR, dense optical flow, captioners); no score parity with
 * any model is claimed.
 */

import { Image, loadImage, luma } from "./ppm.js";
import {
  PluginRequest,
  PluginResponse,
  errorResponse,
  okResponse,
} from "./protocol.js";

function mean(xs: Float64Array): number {
  let s = 0;
  for (const x of xs) s += x;
  return s / xs.length;
}

function variance(xs: Float64Array): number {
  const m = mean(xs);
  let s = 0;
  for (const x of xs) s += (x - m) * (x - m);
  return s / xs.length;
}

/** Sharpness/contrast blend on the same 0-10 scale as the pipeline proxy. */
export function aestheticScore(image: Image): number {
  const g = luma(image);
  const { width: w, height: h } = image;
  let lapVar = 0;
  if (w >= 3 && h >= 3) {
    const lap = new Float64Array((w - 2) * (h - 2));
    let k = 0;
    for (let y = 1; y < h - 1; y++) {
      for (let x = 1; x < w - 1; x++) {
        lap[k++] =
          g[(y - 1) * w + x] +
          g[(y + 1) * w + x] +
          g[y * w + x - 1] +
          g[y * w + x + 1] -
          4 * g[y * w + x];
      }
    }
    lapVar = variance(lap);
  }
  const sharpness = Math.min(1, lapVar / 1000);
  const contrast = Math.sqrt(variance(g)) / 128;
  const score = 5 * sharpness + 5 * contrast;
  return Math.max(0, Math.min(10, score));
}

/** 32x32 mean-centered gray downsample (nearest sample per cell). */
export function embedImage(image: Image): number[] {
  const g = luma(image);
  const out = new Array<number>(32 * 32);
  for (let y = 0; y < 32; y++) {
    for (let x = 0; x < 32; x++) {
      const sy = Math.min(image.height - 1, Math.floor(((y + 0.5) * image.height) / 32));
      const sx = Math.min(image.width - 1, Math.floor(((x + 0.5) * image.width) / 32));
      out[y * 32 + x] = g[sy * image.width + sx];
    }
  }
  const m = out.reduce((a, b) => a + b, 0) / out.length;
  return out.map((v) => v - m);
}

/** Text-like boxes: 8x8 blocks dense in horizontal gradient, merged. */
export function detectTextBoxes(image: Image): number[][] {
  const g = luma(image);
  const { width: w, height: h } = image;
  if (w < 2) return [];
  const gw = w - 1;
  let total = 0;
  const grad = new Float64Array(h * gw);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < gw; x++) {
      const v = Math.abs(g[y * w + x + 1] - g[y * w + x]);
      grad[y * gw + x] = v;
      total += v;
    }
  }
  const overall = total / (h * gw);
  if (overall <= 0) return [];

  const nby = Math.ceil(h / 8);
  const nbx = Math.ceil(gw / 8);
  const qualifies: boolean[] = new Array(nby * nbx).fill(false);
  for (let by = 0; by < nby; by++) {
    for (let bx = 0; bx < nbx; bx++) {
      let s = 0;
      let count = 0;
      for (let y = by * 8; y < Math.min(by * 8 + 8, h); y++) {
        for (let x = bx * 8; x < Math.min(bx * 8 + 8, gw); x++) {
          s += grad[y * gw + x];
          count++;
        }
      }
      qualifies[by * nbx + bx] = s / count > 4 * overall;
    }
  }

  const seen: boolean[] = new Array(nby * nbx).fill(false);
  const boxes: number[][] = [];
  for (let start = 0; start < nby * nbx; start++) {
    if (!qualifies[start] || seen[start]) continue;
    const stack = [start];
    seen[start] = true;
    let minY = Math.floor(start / nbx);
    let maxY = minY;
    let minX = start % nbx;
    let maxX = minX;
    while (stack.length > 0) {
      const cur = stack.pop()!;
      const cy = Math.floor(cur / nbx);
      const cx = cur % nbx;
      minY = Math.min(minY, cy);
      maxY = Math.max(maxY, cy);
      minX = Math.min(minX, cx);
      maxX = Math.max(maxX, cx);
      for (const [ny, nx] of [[cy - 1, cx], [cy + 1, cx], [cy, cx - 1], [cy, cx + 1]]) {
        const ni = ny * nbx + nx;
        if (ny >= 0 && ny < nby && nx >= 0 && nx < nbx && qualifies[ni] && !seen[ni]) {
          seen[ni] = true;
          stack.push(ni);
        }
      }
    }
    const px = minX * 8;
    const py = minY * 8;
    boxes.push([
      px,
      py,
      Math.min((maxX + 1) * 8, w) - px,
      Math.min((maxY + 1) * 8, h) - py,
    ]);
  }
  boxes.sort((a, b) => b[2] * b[3] - a[2] * a[3]);
  return boxes;
}

/** Mean absolute luma change per sampled step, scaled by the sample rate. */
export function motionProxy(images: Image[], sampleRate: number): number {
  if (images.length < 2) return 0;
  let acc = 0;
  for (let i = 0; i + 1 < images.length; i++) {
    const a = luma(images[i]);
    const b = luma(images[i + 1]);
    let s = 0;
    for (let k = 0; k < a.length; k++) s += Math.abs(a[k] - b[k]);
    acc += s / a.length / 255;
  }
  // map the [0,1] mean change onto the same order of magnitude as a
  // displacement-based score (search radius 8)
  return (acc / (images.length - 1)) * 8 * sampleRate;
}

const TAXONOMY: Array<[number, string]> = [
  [64, "scenery/night"],
  [128, "scenery/dusk"],
  [192, "scenery/day"],
  [256, "scenery/bright"],
];

export function classifyImages(images: Image[]): string {
  const means = images.map((img) => mean(luma(img)));
  const overall = means.reduce((a, b) => a + b, 0) / means.length;
  for (const [ceiling, tag] of TAXONOMY) {
    if (overall < ceiling) return tag;
  }
  return TAXONOMY[TAXONOMY.length - 1][1];
}

function describe(image: Image): string {
  return `${image.width}x${image.height}, mean luma ${mean(luma(image)).toFixed(1)}`;
}

export async function referenceHandler(request: PluginRequest): Promise<PluginResponse> {
  const images = () => request.frames.map((p) => loadImage(p));
  switch (request.task) {
    case "aesthetic":
      return okResponse(request.id, { scores: images().map(aestheticScore) });
    case "embed": {
      const imgs = images();
      if (imgs.length !== 1) return errorResponse(request.id, "embed expects one frame");
      return okResponse(request.id, { embedding: embedImage(imgs[0]) });
    }
    case "ocr": {
      const imgs = images();
      if (imgs.length !== 1) return errorResponse(request.id, "ocr expects one frame");
      return okResponse(request.id, { boxes: detectTextBoxes(imgs[0]) });
    }
    case "motion": {
      const rate = Number(request.params["sample_rate"] ?? 1);
      return okResponse(request.id, { scores: [motionProxy(images(), rate)] });
    }
    case "caption_image": {
      const imgs = images();
      if (imgs.length === 0) return errorResponse(request.id, "no frames");
      return okResponse(request.id, { text: `a still frame, ${describe(imgs[0])}` });
    }
    case "caption_video": {
      const imgs = images();
      if (imgs.length === 0) return errorResponse(request.id, "no frames");
      return okResponse(request.id, {
        text: `a clip of ${imgs.length} keyframes, ${describe(imgs[0])}`,
      });
    }
    case "caption_merge": {
      const video = request.params["video_caption"];
      const keyframes = request.params["keyframe_captions"];
      const parts: string[] = [];
      if (typeof video === "string" && video) parts.push(video);
      if (Array.isArray(keyframes)) {
        parts.push(...keyframes.filter((c): c is string => typeof c === "string" && c !== ""));
      }
      if (parts.length === 0) return errorResponse(request.id, "nothing to merge");
      return okResponse(request.id, { text: parts.join("; ") });
    }
    case "classify":
      return okResponse(request.id, { text: classifyImages(images()) });
    default:
      return errorResponse(request.id, `unknown task ${request.task}`);
  }
}

/**
 * Echo plugin: fixed canned responses per task, no frame IO. The
 * protocol-conformance target. `params.sleep_ms` delays the response so
 * driver-side timeout handling can be exercised.
 */

import {
  PluginRequest,
  PluginResponse,
  errorResponse,
  okResponse,
} from "./protocol.js";

const sleep = (ms: number) => new Promise((res) => setTimeout(res, ms));

export async function echoHandler(request: PluginRequest): Promise<PluginResponse> {
  const delay = Number(request.params["sleep_ms"] ?? 0);
  if (delay > 0) await sleep(delay);
  switch (request.task) {
    case "aesthetic":
      return okResponse(request.id, { scores: [5.0] });
    case "motion":
      return okResponse(request.id, { scores: [1.0] });
    case "embed":
      return okResponse(request.id, { embedding: [1, 0, 0, 0] });
    case "ocr":
      return okResponse(request.id, { boxes: [] });
    case "caption_image":
    case "caption_video":
      return okResponse(request.id, { text: "echo caption" });
    case "caption_merge":
      return okResponse(request.id, { text: "echo merged caption" });
    case "classify":
      return okResponse(request.id, { text: "scenery/day" });
    case "fail":
      return errorResponse(request.id, "requested failure");
    default:
      return okResponse(request.id, { text: request.task });
  }
}

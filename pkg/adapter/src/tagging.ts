/**
 * Request handling: subword tokenization, piece classification, first-subtoken
 * collapse, BIO repair, and B-X padding of the augmented region.
 */

import { alignWords, collapseLabels, repairBio } from "./align.js";
import { PieceClassifier } from "./model.js";
import { TagRequest, TagResponse } from "./protocol.js";

export function handleRequest(
  model: PieceClassifier,
  maxSubwordLen: number,
  req: TagRequest,
): TagResponse {
  const baseWords = req.tokens.slice(0, req.base_len);
  const alignment = alignWords(model.vocab, baseWords);
  if (alignment.pieces.length > maxSubwordLen) {
    throw new Error(
      `request ${req.id}: ${alignment.pieces.length} pieces exceed window ${maxSubwordLen}`,
    );
  }
  const pieceLabels = model.classify(alignment.pieces);
  const wordLabels = repairBio(collapseLabels(alignment, pieceLabels));
  // everything past the base region is augmentation context
  const padding = new Array<string>(req.tokens.length - req.base_len).fill("B-X");
  return { id: req.id, labels: [...wordLabels, ...padding] };
}

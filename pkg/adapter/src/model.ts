/**
 * Piece-level classifiers the adapter can serve.
 *
 * A model maps subword pieces to one label per piece. The echo model predicts
 * O everywhere and needs no weights, so protocol tests never download
 * anything; real encoders plug in behind the same interface.
 */

import { EMPTY_VOCAB, SubwordVocab } from "./align.js";

export interface AdapterConfig {
  /** model path or name; empty string selects echo mode */
  model: string;
  /** tokenizer window, pieces (default 512) */
  maxSubwordLen: number;
  batchSize: number;
  device: string;
}

export const DEFAULT_CONFIG: AdapterConfig = {
  model: "",
  maxSubwordLen: 512,
  batchSize: 16,
  device: "cpu",
};

export interface PieceClassifier {
  vocab: SubwordVocab;
  classify(pieces: string[]): string[];
}

export class EchoModel implements PieceClassifier {
  vocab = EMPTY_VOCAB;

  classify(pieces: string[]): string[] {
    return pieces.map(() => "O");
  }
}

export function loadModel(config: AdapterConfig): PieceClassifier {
  if (config.maxSubwordLen < 2) {
    throw new Error(`max subword length must be >= 2, got ${config.maxSubwordLen}`);
  }
  if (config.model === "") return new EchoModel();
  // Real encoder checkpoints are supplied by the user and loaded through a
  // runtime that is out of scope here; fail before answering any ping.
  throw new Error(`cannot load model ${JSON.stringify(config.model)}: no encoder runtime available`);
}

/**
 * WordPiece-style subword segmentation and label alignment.
 *
 * Words are split greedily (longest matching piece first, later pieces carry
 * the "##" continuation prefix); a word with no matching prefix becomes a
 * single [UNK] piece. Piece-level predictions collapse back to words via the
 * first-subtoken rule, then orphan I- labels are repaired to B-.
 */

export interface SubwordVocab {
  pieces: ReadonlySet<string>;
  continuationPrefix: string;
  unknownPiece: string;
}

export function makeVocab(
  pieces: Iterable<string>,
  continuationPrefix = "##",
  unknownPiece = "[UNK]",
): SubwordVocab {
  const set = new Set(pieces);
  set.add(unknownPiece);
  return { pieces: set, continuationPrefix, unknownPiece };
}

/** Vocabulary of the echo test double: every word is a single [UNK] piece. */
export const EMPTY_VOCAB = makeVocab([]);

export function tokenizeWord(vocab: SubwordVocab, word: string): string[] {
  if (!word) throw new Error("cannot tokenize an empty word");
  const pieces: string[] = [];
  let start = 0;
  while (start < word.length) {
    let end = word.length;
    let found: string | null = null;
    while (end > start) {
      let candidate = word.slice(start, end);
      if (start > 0) candidate = vocab.continuationPrefix + candidate;
      if (vocab.pieces.has(candidate)) {
        found = candidate;
        break;
      }
      end -= 1;
    }
    if (found === null) return [vocab.unknownPiece];
    pieces.push(found);
    start = end;
  }
  return pieces;
}

export interface Alignment {
  pieces: string[];
  /** per word: starting piece index */
  wordStarts: number[];
}

export function alignWords(vocab: SubwordVocab, words: string[]): Alignment {
  const pieces: string[] = [];
  const wordStarts: number[] = [];
  for (const word of words) {
    wordStarts.push(pieces.length);
    pieces.push(...tokenizeWord(vocab, word));
  }
  return { pieces, wordStarts };
}

/** First-subtoken rule: word i's label is its first piece's label. */
export function collapseLabels(alignment: Alignment, pieceLabels: string[]): string[] {
  if (pieceLabels.length !== alignment.pieces.length) {
    throw new Error(
      `${pieceLabels.length} piece labels for ${alignment.pieces.length} pieces`,
    );
  }
  return alignment.wordStarts.map((start) => pieceLabels[start]);
}

/** Promote orphan or type-switching I- labels to B- so output is valid BIO. */
export function repairBio(labels: string[]): string[] {
  const out: string[] = [];
  for (let i = 0; i < labels.length; i++) {
    const lab = labels[i];
    if (lab.startsWith("I-")) {
      const prev = i > 0 ? out[i - 1] : "O";
      const prevType = prev.startsWith("B-") || prev.startsWith("I-") ? prev.slice(2) : null;
      if (prevType !== lab.slice(2)) {
        out.push("B-" + lab.slice(2));
        continue;
      }
    }
    out.push(lab);
  }
  return out;
}

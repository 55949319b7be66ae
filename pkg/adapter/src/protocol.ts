/**
 * Tagger Wire Protocol message types.
 *
 * One JSON object per line. A {"op": "ping"} / {"op": "pong"} exchange
 * precedes batches; every tagging request carries an id that the response
 * echoes back, so responses may be reordered.
 */

import { z } from "zod";

export const ENTITY_TYPES = ["LOC", "PER", "PROD", "GRP", "CORP", "CW"] as const;

export const LABELS: ReadonlySet<string> = new Set([
  "O",
  "B-X",
  ...ENTITY_TYPES.flatMap((t) => [`B-${t}`, `I-${t}`]),
]);

export const PingSchema = z.object({ op: z.literal("ping") }).strict();

export const TagRequestSchema = z
  .object({
    id: z.string(),
    tokens: z.array(z.string().min(1)).min(1),
    base_len: z.number().int().min(1),
  })
  .refine((r) => r.base_len <= r.tokens.length, {
    message: "base_len exceeds token count",
  });

export type TagRequest = z.infer<typeof TagRequestSchema>;

export interface TagResponse {
  id: string;
  labels: string[];
}

export interface ErrorResponse {
  id: string | null;
  error: string;
}

export type Response = TagResponse | ErrorResponse | { op: "pong" };

/** Parse one incoming line into a ping or a tag request; throws on anything else. */
export function parseLine(line: string): { op: "ping" } | TagRequest {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error("invalid JSON");
  }
  const ping = PingSchema.safeParse(raw);
  if (ping.success) return ping.data;
  const req = TagRequestSchema.safeParse(raw);
  if (req.success) return req.data;
  throw new Error(req.error.issues.map((i) => i.message).join("; "));
}

/** Best-effort extraction of an id from a malformed request, for error replies. */
export function salvageId(line: string): string | null {
  try {
    const raw = JSON.parse(line);
    if (raw && typeof raw === "object" && typeof (raw as any).id === "string") {
      return (raw as any).id;
    }
  } catch {
    // fall through
  }
  return null;
}

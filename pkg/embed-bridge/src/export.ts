/**
 * Export pipeline: corpus JSONL in, embedding container + manifest out.
 *
 * Every sentence becomes one block: a reserved sentinel subword is prepended,
 * each token is split into subwords, the encoder embeds the whole subword
 * sequence in context, and subword vectors are mean-pooled back to token
 * boundaries. The block therefore always has exactly (token count + 1) rows,
 * which is what the consumer validates against its own tokenization.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

import { loadEncoder, splitSubwords, SubwordEncoder } from "./encoder.js";
import { encodeContainer, SentenceBlock } from "./format.js";
import { LanguageMode, tokenize } from "./tokenize.js";

export const SENTINEL_SUBWORD = "<s>";

export class AlignmentError extends Error {}

export interface ExportOptions {
  model: string;
  dim: number;
  seed: number;
  languageMode: LanguageMode;
  outPath: string;
  manifestPath?: string;
}

export interface ExportManifest {
  model: string;
  dimension: number;
  alignment: "mean_pooled_subwords";
  language_mode: LanguageMode;
  sentence_count: number;
  sentence_ids: string[];
  checksum: string;
}

export function sentenceId(text: string): string {
  return createHash("sha256").update(text, "utf8").digest("hex").slice(0, 16);
}

export function readCorpusTexts(path: string): string[] {
  const texts: string[] = [];
  const lines = readFileSync(path, "utf8").split("\n");
  lines.forEach((line, index) => {
    const trimmed = line.trim();
    if (!trimmed) return;
    let record: unknown;
    try {
      record = JSON.parse(trimmed);
    } catch {
      throw new Error(`line ${index + 1}: not valid JSON`);
    }
    const text = (record as { text?: unknown }).text;
    if (typeof text !== "string") {
      if (index === 0 && (record as { categories?: unknown }).categories) return; // vocab header
      throw new Error(`line ${index + 1}: record has no "text" string`);
    }
    texts.push(text);
  });
  return texts;
}

export async function embedSentence(
  text: string,
  encoder: SubwordEncoder,
  mode: LanguageMode,
): Promise<SentenceBlock> {
  const tokens = tokenize(text, mode);
  if (tokens.length === 0) {
    throw new AlignmentError(`sentence ${JSON.stringify(text)} has no tokens`);
  }
  const subwords: string[] = [SENTINEL_SUBWORD];
  const spans: Array<[number, number]> = []; // token -> [start, end) in subwords
  for (const token of tokens) {
    const pieces = splitSubwords(token);
    if (pieces.length === 0) {
      throw new AlignmentError(`token ${JSON.stringify(token)} maps to zero subwords`);
    }
    spans.push([subwords.length, subwords.length + pieces.length]);
    subwords.push(...pieces);
  }
  const vectors = await encoder.encode(subwords);
  const rows: Float64Array[] = [vectors[0]]; // sentinel row
  for (const [start, end] of spans) {
    const pooled = new Float64Array(encoder.dim);
    for (let s = start; s < end; s += 1) {
      for (let k = 0; k < encoder.dim; k += 1) pooled[k] += vectors[s][k];
    }
    for (let k = 0; k < encoder.dim; k += 1) pooled[k] /= end - start;
    rows.push(pooled);
  }
  return { id: sentenceId(text), rows };
}

export async function runExport(corpusPath: string, options: ExportOptions): Promise<ExportManifest> {
  const texts = readCorpusTexts(corpusPath);
  const encoder = await loadEncoder(options.model, options.dim, options.seed);
  const blocks: SentenceBlock[] = [];
  const seen = new Set<string>();
  for (const text of texts) {
    const block = await embedSentence(text, encoder, options.languageMode);
    if (seen.has(block.id)) continue; // duplicate sentence text, one block suffices
    seen.add(block.id);
    blocks.push(block);
  }
  const payload = encodeContainer(encoder.dim, blocks);
  writeFileSync(options.outPath, payload);
  const manifest: ExportManifest = {
    model: encoder.name,
    dimension: encoder.dim,
    alignment: "mean_pooled_subwords",
    language_mode: options.languageMode,
    sentence_count: blocks.length,
    sentence_ids: blocks.map((b) => b.id),
    checksum: createHash("sha256").update(payload).digest("hex"),
  };
  if (options.manifestPath) {
    writeFileSync(options.manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  }
  return manifest;
}

/**
 * Word-boundary rules matching the consumer's tokenizer exactly: the scorer
 * validates that every embedding block has one row per token plus the
 * sentinel, so both sides must agree on token counts.
 *
 * space_punct: split on whitespace, isolate punctuation/symbol characters.
 * per_character: one token per non-whitespace character (Chinese text).
 */

export type LanguageMode = "space_punct" | "per_character";

const PUNCT = /[\p{P}\p{S}]/u;

export function tokenize(text: string, mode: LanguageMode = "space_punct"): string[] {
  const tokens: string[] = [];
  if (mode === "per_character") {
    for (const ch of text) {
      if (!/\s/u.test(ch)) tokens.push(ch);
    }
    return tokens;
  }
  let current = "";
  for (const ch of text) {
    if (/\s/u.test(ch)) {
      if (current) {
        tokens.push(current);
        current = "";
      }
    } else if (PUNCT.test(ch)) {
      if (current) {
        tokens.push(current);
        current = "";
      }
      tokens.push(ch);
    } else {
      current += ch;
    }
  }
  if (current) tokens.push(current);
  return tokens;
}

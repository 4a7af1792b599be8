#!/usr/bin/env node
/**
 * embed-bridge export <corpus.jsonl> [--model local-hash] [--dim 32]
 *                    [--seed 0] [--lang en|zh] --out FILE [--manifest FILE]
 */

import { runExport } from "./export.js";
import { LanguageMode } from "./tokenize.js";

function fail(message: string): never {
  console.error(`embed-bridge: error: ${message}`);
  process.exit(1);
}

function parseArgs(argv: string[]) {
  const [command, ...rest] = argv;
  if (command !== "export") fail(`unknown command ${JSON.stringify(command)}; expected "export"`);
  const positional: string[] = [];
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 1) {
    const arg = rest[i];
    if (arg.startsWith("--")) {
      const value = rest[i + 1];
      if (value === undefined) fail(`flag ${arg} needs a value`);
      flags.set(arg.slice(2), value);
      i += 1;
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 1) fail("export needs exactly one corpus path");
  const known = new Set(["model", "dim", "seed", "lang", "out", "manifest"]);
  for (const key of flags.keys()) {
    if (!known.has(key)) fail(`unknown flag --${key}`);
  }
  const out = flags.get("out");
  if (!out) fail("--out is required");
  const dim = Number(flags.get("dim") ?? "32");
  if (!Number.isInteger(dim) || dim <= 0) fail(`bad --dim ${flags.get("dim")}`);
  const lang = flags.get("lang") ?? "en";
  if (lang !== "en" && lang !== "zh") fail(`bad --lang ${lang}`);
  return {
    corpus: positional[0],
    model: flags.get("model") ?? "local-hash",
    dim,
    seed: Number(flags.get("seed") ?? "0"),
    languageMode: (lang === "zh" ? "per_character" : "space_punct") as LanguageMode,
    outPath: out,
    manifestPath: flags.get("manifest"),
  };
}

async function main() {
  const options = parseArgs(process.argv.slice(2));
  try {
    const manifest = await runExport(options.corpus, options);
    console.log(
      `exported ${manifest.sentence_count} sentences at dim ${manifest.dimension} ` +
        `(model ${manifest.model}, sha256 ${manifest.checksum.slice(0, 12)}...)`,
    );
  } catch (error) {
    fail(error instanceof Error ? error.message : String(error));
  }
}

main();

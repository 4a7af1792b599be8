/**
 * Binary embedding container shared with the scorer's file-backed provider.
 *
 * Layout, all integers little-endian u32, floats little-endian f32:
 *   magic "OAQP" | version=1 | dim | sentence count
 *   per sentence: id byte length | id (UTF-8) | token count m | (m+1)*dim floats
 *
 * Row 0 of every block is the sentinel vector; rows 1..m are the tokens.
 */

export const MAGIC = "OAQP";
export const VERSION = 1;

export interface SentenceBlock {
  id: string;
  /** (m+1) rows by dim columns, row-major; row 0 = sentinel. */
  rows: Float64Array[];
}

export function encodeContainer(dim: number, blocks: SentenceBlock[]): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(16);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(dim, 8);
  header.writeUInt32LE(blocks.length, 12);
  chunks.push(header);
  for (const block of blocks) {
    const idBytes = Buffer.from(block.id, "utf8");
    const prefix = Buffer.alloc(4 + idBytes.length + 4);
    prefix.writeUInt32LE(idBytes.length, 0);
    idBytes.copy(prefix, 4);
    prefix.writeUInt32LE(block.rows.length - 1, 4 + idBytes.length);
    chunks.push(prefix);
    const floats = Buffer.alloc(block.rows.length * dim * 4);
    block.rows.forEach((row, r) => {
      if (row.length !== dim) {
        throw new Error(`block ${block.id}: row ${r} has ${row.length} values, expected ${dim}`);
      }
      for (let k = 0; k < dim; k += 1) {
        floats.writeFloatLE(row[k], (r * dim + k) * 4);
      }
    });
    chunks.push(floats);
  }
  return Buffer.concat(chunks);
}

export function decodeContainer(payload: Buffer): { dim: number; blocks: SentenceBlock[] } {
  if (payload.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${payload.toString("ascii", 0, 4)}`);
  }
  const version = payload.readUInt32LE(4);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const dim = payload.readUInt32LE(8);
  const count = payload.readUInt32LE(12);
  let offset = 16;
  const blocks: SentenceBlock[] = [];
  for (let i = 0; i < count; i += 1) {
    const idLength = payload.readUInt32LE(offset);
    offset += 4;
    const id = payload.toString("utf8", offset, offset + idLength);
    offset += idLength;
    const m = payload.readUInt32LE(offset);
    offset += 4;
    const rows: Float64Array[] = [];
    for (let r = 0; r < m + 1; r += 1) {
      const row = new Float64Array(dim);
      for (let k = 0; k < dim; k += 1) {
        row[k] = payload.readFloatLE(offset);
        offset += 4;
      }
      rows.push(row);
    }
    blocks.push({ id, rows });
  }
  if (offset !== payload.length) throw new Error("trailing bytes in container");
  return { dim, blocks };
}

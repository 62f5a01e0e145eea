import * as crypto from "crypto";
import * as fs from "fs";
import * as path from "path";

export interface ManifestEntry {
  path: string;
  sha256: string;
  bytes: number;
}

export interface Manifest {
  artifact_version: string;
  config_hash: string;
  config: Record<string, unknown>;
  seeds: number[];
  outputs: ManifestEntry[];
  wall_clock: Record<string, number>;
}

/** A run directory opened through its manifest: reads are restricted to
 *  listed outputs and every read re-verifies the recorded checksum. */
export class ReportBundle {
  readonly dir: string;
  readonly manifest: Manifest;
  private readonly entries: Map<string, ManifestEntry>;

  constructor(dir: string) {
    this.dir = dir;
    const manifestPath = path.join(dir, "run_manifest.json");
    if (!fs.existsSync(manifestPath)) {
      throw new Error(`no run manifest in ${dir}`);
    }
    let parsed: Manifest;
    try {
      parsed = JSON.parse(fs.readFileSync(manifestPath, "utf8")) as Manifest;
    } catch (err) {
      throw new Error(`corrupt manifest in ${dir}: ${err}`);
    }
    if (!Array.isArray(parsed.outputs)) {
      throw new Error(`corrupt manifest in ${dir}: missing outputs list`);
    }
    this.manifest = parsed;
    this.entries = new Map(parsed.outputs.map((e) => [e.path, e]));
  }

  listOutputs(prefix = ""): string[] {
    return [...this.entries.keys()].filter((name) => name.startsWith(prefix)).sort();
  }

  has(name: string): boolean {
    return this.entries.has(name);
  }

  /** Read a listed output, failing on unlisted names or checksum mismatch. */
  readBytes(name: string): Buffer {
    const entry = this.entries.get(name);
    if (!entry) {
      throw new Error(`${name} is not listed in the manifest of ${this.dir}`);
    }
    const data = fs.readFileSync(path.join(this.dir, name));
    const digest = crypto.createHash("sha256").update(data).digest("hex");
    if (digest !== entry.sha256) {
      throw new Error(`checksum mismatch for ${name}: ${digest} != ${entry.sha256}`);
    }
    return data;
  }

  readText(name: string): string {
    return this.readBytes(name).toString("utf8");
  }
}

export function sha256Hex(data: string | Buffer): string {
  return crypto.createHash("sha256").update(data).digest("hex");
}

/** Canonical checksum of a series: hash of the raw CSV tokens joined by
 *  commas, so anyone holding the source file can recompute it. */
export function seriesChecksum(rawTokens: string[]): string {
  return sha256Hex(rawTokens.join(","));
}

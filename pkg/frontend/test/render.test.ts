import * as crypto from "crypto";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { afterAll, describe, expect, it } from "vitest";

import { ReportBundle, seriesChecksum } from "../src/manifest";
import { renderAll, renderEntropy, renderEpsStudy, renderKind, renderMoments, renderSnapshots } from "../src/render";
import { listDensitySnapshots } from "../src/snapshots";
import { main } from "../src/cli";

const FIXTURES = path.join(__dirname, "..", "fixtures");
const SIM = path.join(FIXTURES, "run_sim");
const ENS = path.join(FIXTURES, "run_ens");
const EPS = path.join(FIXTURES, "run_eps");
const EXPECTED = path.join(FIXTURES, "expected");

const scratchDirs: string[] = [];
function scratch(): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "sktlab-plots-"));
  scratchDirs.push(dir);
  return dir;
}
afterAll(() => {
  for (const dir of scratchDirs) {
    fs.rmSync(dir, { recursive: true, force: true });
  }
});

function csvColumnTokens(file: string, name: string): string[] {
  const lines = fs.readFileSync(file, "utf8").trim().split("\n");
  const idx = lines[0].split(",").indexOf(name);
  expect(idx).toBeGreaterThanOrEqual(0);
  return lines.slice(1).map((line) => line.split(",")[idx]);
}

describe("all four figure types render from the shipped fixtures", () => {
  it("renders entropy, snapshots, moments, and eps-study with nonzero outputs", () => {
    const out = scratch();
    const written = [
      ...renderAll(SIM, path.join(out, "sim")),
      ...renderAll(ENS, path.join(out, "ens")),
      ...renderAll(EPS, path.join(out, "eps")),
    ];
    const names = written.map((p) => path.basename(p)).sort();
    expect(names).toContain("entropy.svg");
    expect(names).toContain("snapshots.svg");
    expect(names).toContain("moments.svg");
    expect(names).toContain("eps_study.svg");
    for (const p of written) {
      expect(fs.statSync(p).size).toBeGreaterThan(0);
    }
  });

  it("matches the frozen golden figures byte for byte", () => {
    const out = scratch();
    renderAll(SIM, path.join(out, "sim"));
    renderAll(ENS, path.join(out, "ens"));
    renderAll(EPS, path.join(out, "eps"));
    for (const sub of ["sim", "ens", "eps"]) {
      for (const name of fs.readdirSync(path.join(EXPECTED, sub))) {
        const fresh = fs.readFileSync(path.join(out, sub, name));
        const golden = fs.readFileSync(path.join(EXPECTED, sub, name));
        expect(fresh.equals(golden), `${sub}/${name} drifted from the golden copy`).toBe(true);
      }
    }
  });

  it("is deterministic across repeated renders", () => {
    const a = scratch();
    const b = scratch();
    renderAll(SIM, a);
    renderAll(SIM, b);
    for (const name of fs.readdirSync(a)) {
      expect(fs.readFileSync(path.join(a, name)).equals(fs.readFileSync(path.join(b, name)))).toBe(true);
    }
  });
});

describe("entropy figure", () => {
  it("reports series checksums that recompute from the fixture CSV", () => {
    const fig = renderEntropy(new ReportBundle(SIM));
    const sums = fig.sidecar.series_checksums as Record<string, string>;
    const csv = path.join(SIM, "timeseries.csv");
    expect(sums.t).toBe(seriesChecksum(csvColumnTokens(csv, "t")));
    expect(sums.H).toBe(seriesChecksum(csvColumnTokens(csv, "H")));
    expect(sums.dissipation).toBe(seriesChecksum(csvColumnTokens(csv, "dissipation")));
  });

  it("reports a nonincreasing entropy with consistent range metadata", () => {
    // the fixture is a zero-noise run, where the integrator guarantees decay
    const fig = renderEntropy(new ReportBundle(SIM));
    const sc = fig.sidecar as {
      entropy_nonincreasing: boolean;
      entropy_range: [number, number];
      entropy_first: number;
      entropy_last: number;
    };
    expect(sc.entropy_nonincreasing).toBe(true);
    expect(sc.entropy_range[1]).toBeCloseTo(sc.entropy_first, 12);
    expect(sc.entropy_range[0]).toBeCloseTo(sc.entropy_last, 12);
    expect(sc.entropy_last).toBeLessThanOrEqual(sc.entropy_first);
  });
});

describe("snapshot grid", () => {
  it("renders one panel row per snapshot", () => {
    const bundle = new ReportBundle(SIM);
    const fig = renderSnapshots(bundle);
    expect(fig.sidecar.count).toBe(listDensitySnapshots(bundle).length);
    const times = fig.sidecar.times as number[];
    expect(times.length).toBe(fig.sidecar.count);
    expect([...times].sort((x, y) => x - y)).toEqual(times);
  });

  it("checksums every payload it drew", () => {
    const bundle = new ReportBundle(SIM);
    const fig = renderSnapshots(bundle);
    const sums = fig.sidecar.payload_checksums as Record<string, string>;
    for (const [header, digest] of Object.entries(sums)) {
      const payload = header.replace(".json", ".bin");
      const raw = fs.readFileSync(path.join(SIM, payload));
      expect(crypto.createHash("sha256").update(raw).digest("hex")).toBe(digest);
    }
  });
});

describe("moments table", () => {
  it("lists every aggregate functional with recomputable checksums", () => {
    const fig = renderMoments(new ReportBundle(ENS));
    const functionals = fig.sidecar.functionals as string[];
    expect(functionals).toContain("sup_entropy");
    const sums = fig.sidecar.series_checksums as Record<string, string>;
    const csv = path.join(ENS, "ensemble.csv");
    expect(sums.mean).toBe(seriesChecksum(csvColumnTokens(csv, "mean")));
  });
});

describe("eps-study figure", () => {
  it("flags the decreasing successive differences", () => {
    const fig = renderEpsStudy(new ReportBundle(EPS));
    expect(fig.sidecar.differences_decreasing).toBe(true);
    const eps = fig.sidecar.epsilon as number[];
    expect(eps).toEqual([0.1, 0.01, 0.001]);
  });
});

describe("manifest discipline", () => {
  it("rejects directories without a manifest", () => {
    expect(() => new ReportBundle(scratch())).toThrow(/no run manifest/);
  });

  it("rejects corrupt manifests", () => {
    const dir = scratch();
    fs.writeFileSync(path.join(dir, "run_manifest.json"), "{not json");
    expect(() => new ReportBundle(dir)).toThrow(/corrupt manifest/);
  });

  it("refuses to read files not listed in the manifest", () => {
    const bundle = new ReportBundle(SIM);
    expect(() => bundle.readText("sim_cfg.json")).toThrow(/not listed/);
  });

  it("fails on checksum mismatch", () => {
    const dir = scratch();
    for (const name of fs.readdirSync(SIM)) {
      fs.copyFileSync(path.join(SIM, name), path.join(dir, name));
    }
    fs.appendFileSync(path.join(dir, "timeseries.csv"), "tampered\n");
    const bundle = new ReportBundle(dir);
    expect(() => renderEntropy(bundle)).toThrow(/checksum mismatch/);
  });

  it("reports empty series cleanly", () => {
    const dir = scratch();
    const header = "t,H,dissipation,mass_1,min_u,max_u,l2_1,newton_iters\n";
    fs.writeFileSync(path.join(dir, "timeseries.csv"), header);
    const digest = crypto.createHash("sha256").update(header).digest("hex");
    fs.writeFileSync(
      path.join(dir, "run_manifest.json"),
      JSON.stringify({
        artifact_version: "0.1.0",
        config_hash: "x",
        config: {},
        seeds: [1],
        outputs: [{ path: "timeseries.csv", sha256: digest, bytes: header.length }],
        wall_clock: {},
      }),
    );
    expect(() => renderEntropy(new ReportBundle(dir))).toThrow(/no rows/);
  });
});

describe("command line", () => {
  it("renders a single kind and exits 0", () => {
    const out = scratch();
    expect(main(["entropy", "--dir", SIM, "--out", out])).toBe(0);
    expect(fs.existsSync(path.join(out, "entropy.svg"))).toBe(true);
  });

  it("exits 2 on unusable inputs", () => {
    expect(main(["bogus-kind"])).toBe(2);
    expect(main(["entropy", "--dir", scratch(), "--out", scratch()])).toBe(2);
    expect(main(["entropy", "--dir", SIM])).toBe(2);
  });
});

import { execFileSync } from "child_process";
import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "fs";
import { tmpdir } from "os";
import { join, dirname } from "path";
import { fileURLToPath } from "url";
import { describe, expect, it } from "vitest";

import { parseResults, readResults, SchemaError } from "../src/csv.js";
import { buildFigure, FIGURE_IDS, FigureId } from "../src/figures.js";
import { main } from "../src/render.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = (id: string) => join(here, "fixtures", `${id}.csv`);

describe("csv parsing", () => {
    it("rejects an empty file naming the expected columns", () => {
        expect(() => parseResults("")).toThrowError(SchemaError);
        expect(() => parseResults("")).toThrowError(/x_value/);
    });

    it("rejects missing columns by name", () => {
        const text = "experiment,curve,x_name,x_value\nfoo,a,x,1\n";
        expect(() => parseResults(text)).toThrowError(/y_value/);
        expect(() => parseResults(text)).toThrowError(/std_error/);
    });

    it("parses fixture rows with numeric fields", () => {
        const rows = readResults(fixture("fig1"));
        expect(rows.length).toBeGreaterThan(4);
        expect(rows[0].experiment).toBe("false-alarm");
        expect(typeof rows[0].x_value).toBe("number");
        expect(Number.isFinite(rows[0].y_value)).toBe(true);
    });
});

describe("figure construction", () => {
    it("renders all five figures from the golden CSVs", () => {
        for (const id of FIGURE_IDS) {
            const rows = readResults(fixture(id));
            const { svg, series } = buildFigure(id, rows);
            expect(svg).toContain("<svg");
            expect(svg).toContain("</svg>");
            expect(series.length).toBeGreaterThan(0);
            for (const s of series) {
                expect(svg).toContain(`data-curve="${s.name}"`);
            }
        }
    });

    it("gives fig1 a log-scaled x axis with decade spacing", () => {
        const rows = readResults(fixture("fig1"));
        const { svg } = buildFigure("fig1", rows);
        expect(svg).toContain('data-x-scale="log"');
        // points at rates 0.1, 1, 10, 100 must be equally spaced in pixels
        const curve = svg.split('data-curve="gaussian-worst-case"')[1].split("</g>")[0];
        const xs = new Map<number, number>();
        for (const m of curve.matchAll(/<circle[^>]*data-x="([^"]+)"[^>]*cx="([^"]+)"/g)) {
            xs.set(Number(m[1]), Number(m[2]));
        }
        const gaps = [
            xs.get(1)! - xs.get(0.1)!,
            xs.get(10)! - xs.get(1)!,
            xs.get(100)! - xs.get(10)!,
        ];
        for (const g of gaps.slice(1)) {
            expect(Math.abs(g - gaps[0])).toBeLessThan(0.5);
        }
    });

    it("keeps fig3b linear in x", () => {
        const rows = readResults(fixture("fig3b"));
        const { svg } = buildFigure("fig3b", rows);
        expect(svg).toContain('data-x-scale="linear"');
    });

    it("overlays the 1 - p_d reference line on fig3d", () => {
        const rows = readResults(fixture("fig3d"));
        const { svg, series } = buildFigure("fig3d", rows);
        const ref = series.find((s) => s.role === "reference");
        expect(ref).toBeDefined();
        expect(svg).toContain('data-role="reference"');
        for (const p of ref!.points) {
            expect(p.y).toBeCloseTo(1 - p.x, 12);
        }
    });

    it("draws error bars from the std_error column", () => {
        const rows = readResults(fixture("fig3c"));
        const { svg } = buildFigure("fig3c", rows);
        expect(svg).toContain('class="errorbar"');
    });

    it("rejects a CSV from the wrong experiment", () => {
        const rows = readResults(fixture("fig1"));
        expect(() => buildFigure("fig3d", rows)).toThrowError(/detection-failure/);
    });
});

describe("cli", () => {
    it("writes an SVG file and returns 0", () => {
        const dir = mkdtempSync(join(tmpdir(), "plots-"));
        const out = join(dir, "fig1.svg");
        const code = main(["--figure", "fig1", "--csv", fixture("fig1"), "--out", out]);
        expect(code).toBe(0);
        expect(readFileSync(out, "utf-8")).toContain("<svg");
    });

    it("returns 2 on an empty CSV", () => {
        const dir = mkdtempSync(join(tmpdir(), "plots-"));
        const empty = join(dir, "empty.csv");
        writeFileSync(empty, "");
        const code = main(["--figure", "fig1", "--csv", empty, "--out", join(dir, "o.svg")]);
        expect(code).toBe(2);
    });

    it("returns 2 on unknown figure ids and missing flags", () => {
        expect(main(["--figure", "fig9", "--csv", "x", "--out", "y"])).toBe(2);
        expect(main(["--figure", "fig1"])).toBe(2);
    });

    it("runs the compiled bundle end to end when built", () => {
        const bundle = join(here, "..", "dist", "render.js");
        if (!existsSync(bundle)) {
            return; // build output not present; covered by the direct main() test
        }
        const dir = mkdtempSync(join(tmpdir(), "plots-"));
        for (const id of FIGURE_IDS as readonly FigureId[]) {
            const out = join(dir, `${id}.svg`);
            execFileSync("node", [bundle, "--figure", id, "--csv", fixture(id), "--out", out]);
            expect(readFileSync(out, "utf-8")).toContain("</svg>");
        }
    });
});

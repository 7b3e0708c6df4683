import { readFileSync } from "fs";

export const REQUIRED_COLUMNS = [
    "experiment",
    "curve",
    "x_name",
    "x_value",
    "y_name",
    "y_value",
    "std_error",
    "n_samples",
    "seed",
] as const;

export interface ResultRow {
    experiment: string;
    curve: string;
    x_name: string;
    x_value: number;
    y_name: string;
    y_value: number;
    std_error: number;
    n_samples: number;
    seed: number;
}

export class SchemaError extends Error {}

function splitLine(line: string): string[] {
    // the runner never quotes fields, so a plain split is exact
    return line.split(",").map((s) => s.trim());
}

export function parseResults(text: string): ResultRow[] {
    const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
    if (lines.length === 0) {
        throw new SchemaError(`empty CSV; expected columns ${REQUIRED_COLUMNS.join(", ")}`);
    }
    const header = splitLine(lines[0]);
    const missing = REQUIRED_COLUMNS.filter((c) => !header.includes(c));
    if (missing.length > 0) {
        throw new SchemaError(`missing columns: ${missing.join(", ")}`);
    }
    if (lines.length === 1) {
        throw new SchemaError("CSV has a header but no data rows");
    }
    const idx = new Map(header.map((c, i) => [c, i]));
    const rows: ResultRow[] = [];
    for (const line of lines.slice(1)) {
        const parts = splitLine(line);
        if (parts.length !== header.length) {
            throw new SchemaError(`row has ${parts.length} fields, header has ${header.length}`);
        }
        const get = (c: string) => parts[idx.get(c)!];
        rows.push({
            experiment: get("experiment"),
            curve: get("curve"),
            x_name: get("x_name"),
            x_value: Number(get("x_value")),
            y_name: get("y_name"),
            y_value: Number(get("y_value")),
            std_error: Number(get("std_error")),
            n_samples: Number(get("n_samples")),
            seed: Number(get("seed")),
        });
    }
    return rows;
}

export function readResults(path: string): ResultRow[] {
    let text: string;
    try {
        text = readFileSync(path, "utf-8");
    } catch (err) {
        throw new SchemaError(`cannot read CSV ${path}: ${(err as Error).message}`);
    }
    return parseResults(text);
}

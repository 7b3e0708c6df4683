import { writeFileSync } from "fs";

import { readResults, SchemaError } from "./csv.js";
import { buildFigure, FIGURE_IDS, FigureId } from "./figures.js";

interface Args {
    figure: FigureId;
    csv: string;
    out: string;
}

export function parseArgs(argv: string[]): Args {
    const values = new Map<string, string>();
    for (let i = 0; i < argv.length; i += 2) {
        const key = argv[i];
        if (!key.startsWith("--") || i + 1 >= argv.length) {
            throw new SchemaError(`usage: render --figure <${FIGURE_IDS.join("|")}> --csv results.csv --out figure.svg`);
        }
        values.set(key.slice(2), argv[i + 1]);
    }
    const figure = values.get("figure");
    const csv = values.get("csv");
    const out = values.get("out");
    if (!figure || !csv || !out) {
        throw new SchemaError("required flags: --figure, --csv, --out");
    }
    if (!(FIGURE_IDS as readonly string[]).includes(figure)) {
        throw new SchemaError(`unknown figure ${figure}; expected one of ${FIGURE_IDS.join(", ")}`);
    }
    return { figure: figure as FigureId, csv, out };
}

export function main(argv: string[]): number {
    let args: Args;
    try {
        args = parseArgs(argv);
        const rows = readResults(args.csv);
        const { svg } = buildFigure(args.figure, rows);
        writeFileSync(args.out, svg + "\n");
    } catch (err) {
        if (err instanceof SchemaError) {
            console.error(`error: ${err.message}`);
            return 2;
        }
        throw err;
    }
    console.log(`wrote ${args.out}`);
    return 0;
}

const invokedDirectly = process.argv[1] && process.argv[1].endsWith("render.js");
if (invokedDirectly) {
    process.exit(main(process.argv.slice(2)));
}

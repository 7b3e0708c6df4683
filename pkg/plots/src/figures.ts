import { ResultRow, SchemaError } from "./csv.js";
import { ChartSpec, renderChart, Series } from "./svg.js";

export const FIGURE_IDS = ["fig1", "fig3a", "fig3b", "fig3c", "fig3d"] as const;
export type FigureId = (typeof FIGURE_IDS)[number];

interface FigureDef {
    experiment: string;
    xLabel: string;
    yLabel: string;
    title: string;
    logX?: boolean;
    referenceLine?: (xs: number[]) => Series;
}

const FIGURES: Record<FigureId, FigureDef> = {
    fig1: {
        experiment: "false-alarm",
        title: "Relative information loss vs clutter rate",
        xLabel: "expected false alarms per frame",
        yLabel: "relative information loss",
        logX: true,
    },
    fig3a: {
        experiment: "num-targets-special",
        title: "Loss vs number of targets (windowed likelihood)",
        xLabel: "number of targets",
        yLabel: "relative information loss",
    },
    fig3b: {
        experiment: "association-tau-alpha",
        title: "Loss vs separation under bounded association uncertainty",
        xLabel: "target separation",
        yLabel: "relative information loss",
    },
    fig3c: {
        experiment: "num-targets-assoc",
        title: "Loss vs number of unit-spaced targets",
        xLabel: "number of targets",
        yLabel: "relative information loss",
    },
    fig3d: {
        experiment: "detection-failure",
        title: "Loss vs detection probability",
        xLabel: "detection probability",
        yLabel: "relative information loss",
        referenceLine: (xs) => ({
            name: "1 - p_d",
            dashed: true,
            role: "reference",
            points: [Math.min(...xs), Math.max(...xs)].map((x) => ({ x, y: 1 - x, se: 0 })),
        }),
    },
};

export function buildFigure(figure: FigureId, rows: ResultRow[]): { svg: string; series: Series[] } {
    const def = FIGURES[figure];
    if (!def) {
        throw new SchemaError(`unknown figure ${figure}; expected one of ${FIGURE_IDS.join(", ")}`);
    }
    const relevant = rows.filter((r) => r.experiment === def.experiment);
    if (relevant.length === 0) {
        const seen = [...new Set(rows.map((r) => r.experiment))].join(", ");
        throw new SchemaError(
            `no rows for experiment "${def.experiment}" in the CSV (found: ${seen})`,
        );
    }
    const byCurve = new Map<string, ResultRow[]>();
    for (const row of relevant) {
        if (!byCurve.has(row.curve)) byCurve.set(row.curve, []);
        byCurve.get(row.curve)!.push(row);
    }
    const series: Series[] = [...byCurve.entries()].map(([name, curveRows]) => ({
        name,
        points: curveRows.map((r) => ({ x: r.x_value, y: r.y_value, se: r.std_error })),
    }));
    if (def.referenceLine) {
        series.push(def.referenceLine(relevant.map((r) => r.x_value)));
    }
    const spec: ChartSpec = {
        title: def.title,
        xLabel: def.xLabel,
        yLabel: def.yLabel,
        logX: def.logX,
    };
    return { svg: renderChart(spec, series), series };
}

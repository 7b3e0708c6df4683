export interface Scale {
    kind: "linear" | "log";
    domain: [number, number];
    range: [number, number];
    toPixel(v: number): number;
    ticks(): number[];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
    const [d0, d1] = domain;
    const span = d1 - d0 || 1;
    return {
        kind: "linear",
        domain,
        range,
        toPixel: (v) => range[0] + ((v - d0) / span) * (range[1] - range[0]),
        ticks: () => niceTicks(d0, d1, 6),
    };
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
    const lo = Math.log10(domain[0]);
    const hi = Math.log10(domain[1]);
    const span = hi - lo || 1;
    return {
        kind: "log",
        domain,
        range,
        toPixel: (v) => range[0] + ((Math.log10(v) - lo) / span) * (range[1] - range[0]),
        ticks: () => {
            const out: number[] = [];
            for (let e = Math.ceil(lo - 1e-9); e <= Math.floor(hi + 1e-9); e++) {
                out.push(10 ** e);
            }
            return out.length >= 2 ? out : [domain[0], domain[1]];
        },
    };
}

function niceTicks(lo: number, hi: number, count: number): number[] {
    if (!(hi > lo)) return [lo];
    const rawStep = (hi - lo) / count;
    const mag = 10 ** Math.floor(Math.log10(rawStep));
    const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
    const step = candidates.find((s) => (hi - lo) / s <= count) ?? candidates[candidates.length - 1];
    const start = Math.ceil(lo / step) * step;
    const ticks: number[] = [];
    for (let v = start; v <= hi + 1e-12; v += step) {
        ticks.push(Number(v.toFixed(12)));
    }
    return ticks;
}

export const PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
];

const esc = (s: string) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
const fmt = (v: number) => {
    const a = Math.abs(v);
    if (a !== 0 && (a < 1e-3 || a >= 1e5)) return v.toExponential(0);
    return Number(v.toPrecision(6)).toString();
};

export interface SeriesPoint {
    x: number;
    y: number;
    se: number;
}

export interface Series {
    name: string;
    points: SeriesPoint[];
    dashed?: boolean;
    role?: string;
}

export interface ChartSpec {
    title: string;
    xLabel: string;
    yLabel: string;
    logX?: boolean;
    width?: number;
    height?: number;
}

export function renderChart(spec: ChartSpec, series: Series[]): string {
    const width = spec.width ?? 680;
    const height = spec.height ?? 460;
    const margin = { left: 64, right: 16, top: 34, bottom: 48 };

    const xs = series.flatMap((s) => s.points.map((p) => p.x));
    const ys = series.flatMap((s) => s.points.flatMap((p) => [p.y - p.se, p.y + p.se]));
    const xDomain: [number, number] = [Math.min(...xs), Math.max(...xs)];
    let yLo = Math.min(...ys);
    let yHi = Math.max(...ys);
    const pad = 0.06 * (yHi - yLo || 1);
    yLo -= pad;
    yHi += pad;

    const xScale = (spec.logX ? logScale : linearScale)(xDomain, [margin.left, width - margin.right]);
    const yScale = linearScale([yLo, yHi], [height - margin.bottom, margin.top]);

    const parts: string[] = [];
    parts.push(
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
            `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12" ` +
            `data-x-scale="${xScale.kind}">`,
    );
    parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
    parts.push(`<text x="${width / 2}" y="18" text-anchor="middle" font-size="14">${esc(spec.title)}</text>`);

    // axes
    const x0 = margin.left;
    const x1 = width - margin.right;
    const y0 = height - margin.bottom;
    const y1 = margin.top;
    parts.push(`<g class="axes" stroke="#333" fill="none">`);
    parts.push(`<path d="M ${x0} ${y0} H ${x1}"/>`);
    parts.push(`<path d="M ${x0} ${y0} V ${y1}"/>`);
    parts.push(`</g>`);
    parts.push(`<g class="ticks" fill="#333">`);
    for (const t of xScale.ticks()) {
        const px = xScale.toPixel(t);
        parts.push(`<line x1="${px.toFixed(2)}" y1="${y0}" x2="${px.toFixed(2)}" y2="${y0 + 5}" stroke="#333"/>`);
        parts.push(
            `<text class="x-tick" data-value="${t}" x="${px.toFixed(2)}" y="${y0 + 18}" text-anchor="middle">${fmt(t)}</text>`,
        );
    }
    for (const t of yScale.ticks()) {
        const py = yScale.toPixel(t);
        parts.push(`<line x1="${x0 - 5}" y1="${py.toFixed(2)}" x2="${x0}" y2="${py.toFixed(2)}" stroke="#333"/>`);
        parts.push(
            `<text class="y-tick" x="${x0 - 8}" y="${(py + 4).toFixed(2)}" text-anchor="end">${fmt(t)}</text>`,
        );
        parts.push(
            `<line x1="${x0}" y1="${py.toFixed(2)}" x2="${x1}" y2="${py.toFixed(2)}" stroke="#eee"/>`,
        );
    }
    parts.push(`</g>`);
    parts.push(
        `<text x="${(x0 + x1) / 2}" y="${height - 10}" text-anchor="middle">${esc(spec.xLabel)}</text>`,
    );
    parts.push(
        `<text transform="translate(16 ${(y0 + y1) / 2}) rotate(-90)" text-anchor="middle">${esc(spec.yLabel)}</text>`,
    );

    series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const pts = [...s.points].sort((a, b) => a.x - b.x);
        const path = pts
            .map((p, j) => `${j === 0 ? "M" : "L"} ${xScale.toPixel(p.x).toFixed(2)} ${yScale.toPixel(p.y).toFixed(2)}`)
            .join(" ");
        const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
        const role = s.role ? ` data-role="${s.role}"` : "";
        parts.push(`<g class="series" data-curve="${esc(s.name)}"${role}>`);
        parts.push(`<path d="${path}" fill="none" stroke="${color}" stroke-width="1.6"${dash}/>`);
        for (const p of pts) {
            const px = xScale.toPixel(p.x);
            const py = yScale.toPixel(p.y);
            if (p.se > 0) {
                const lo = yScale.toPixel(p.y - p.se);
                const hi = yScale.toPixel(p.y + p.se);
                parts.push(
                    `<line class="errorbar" x1="${px.toFixed(2)}" y1="${lo.toFixed(2)}" x2="${px.toFixed(2)}" y2="${hi.toFixed(2)}" stroke="${color}"/>`,
                );
                for (const cap of [lo, hi]) {
                    parts.push(
                        `<line x1="${(px - 3).toFixed(2)}" y1="${cap.toFixed(2)}" x2="${(px + 3).toFixed(2)}" y2="${cap.toFixed(2)}" stroke="${color}"/>`,
                    );
                }
            }
            parts.push(
                `<circle class="point" data-x="${p.x}" data-y="${p.y}" cx="${px.toFixed(2)}" cy="${py.toFixed(2)}" r="2.6" fill="${color}"/>`,
            );
        }
        parts.push(`</g>`);
    });

    // legend
    parts.push(`<g class="legend">`);
    series.forEach((s, i) => {
        const color = PALETTE[i % PALETTE.length];
        const ly = margin.top + 6 + 16 * i;
        const lx = width - margin.right - 170;
        const dash = s.dashed ? ` stroke-dasharray="6 4"` : "";
        parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${color}" stroke-width="1.6"${dash}/>`);
        parts.push(`<text x="${lx + 28}" y="${ly + 4}" fill="#333">${esc(s.name)}</text>`);
    });
    parts.push(`</g>`);
    parts.push(`</svg>`);
    return parts.join("\n");
}

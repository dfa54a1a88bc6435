/** Tiny string-based SVG builder; enough for static batch figures. */

export type Attrs = Record<string, string | number>;

export function el(tag: string, attrs: Attrs, ...children: string[]): string {
    const a = Object.entries(attrs)
        .map(([k, v]) => ` ${k}="${String(v)}"`)
        .join("");
    if (children.length === 0) return `<${tag}${a}/>`;
    return `<${tag}${a}>${children.join("")}</${tag}>`;
}

export function text(content: string, attrs: Attrs): string {
    return el("text", { "font-family": "sans-serif", ...attrs }, escapeXml(content));
}

export function escapeXml(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function svgDocument(width: number, height: number, body: string): string {
    return (
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}">\n` +
        el("rect", { x: 0, y: 0, width, height, fill: "white" }) +
        body +
        "\n</svg>\n"
    );
}

// ----------------------------------------------------------------------
// scales

export interface Scale {
    map(v: number): number;
    ticks: number[];
}

export function logScale(lo: number, hi: number, rlo: number, rhi: number): Scale {
    if (lo <= 0 || hi <= 0) throw new Error("log scale requires positive domain");
    const [a, b] = [Math.log10(lo), Math.log10(hi)];
    const span = b - a || 1;
    const ticks: number[] = [];
    for (let e = Math.ceil(a); e <= Math.floor(b); e++) ticks.push(10 ** e);
    if (ticks.length === 0) ticks.push(lo, hi);
    return {
        map: (v) => rlo + ((Math.log10(v) - a) / span) * (rhi - rlo),
        ticks,
    };
}

export function linearScale(lo: number, hi: number, rlo: number, rhi: number): Scale {
    const span = hi - lo || 1;
    const step = niceStep(span / 4);
    const ticks: number[] = [];
    for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * span; t += step) {
        ticks.push(t);
    }
    return {
        map: (v) => rlo + ((v - lo) / span) * (rhi - rlo),
        ticks,
    };
}

function niceStep(raw: number): number {
    const mag = 10 ** Math.floor(Math.log10(raw));
    const r = raw / mag;
    if (r < 1.5) return mag;
    if (r < 3.5) return 2 * mag;
    if (r < 7.5) return 5 * mag;
    return 10 * mag;
}

export function formatTick(v: number): string {
    if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
        const e = Math.round(Math.log10(Math.abs(v)));
        const m = v / 10 ** e;
        return (Math.abs(m - 1) < 1e-9 ? "" : `${m.toPrecision(2)}x`) + `1e${e}`;
    }
    return String(Number(v.toPrecision(4)));
}

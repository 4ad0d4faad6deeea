/**
 * Client-side rule-legal mark switching.
 *
 * The backend ships machine-checkable per-mark constraints with every round
 * (`mark_rules`); re-encoding a chart under another mark happens entirely on
 * the client, but only marks whose constraints the chart's data satisfies are
 * offered. This is deliberately the only recommendation-flavored logic that
 * lives in the UI.
 */

import type { ChartSpec, MarkKind, MarkRule, MarkRules } from "./types.js";

const ALL_MARKS: MarkKind[] = ["bar", "line", "pie", "scatter"];

function distinctX(spec: ChartSpec): number {
  return new Set(spec.data.map((r) => String(r.x))).size;
}

/** Why a switch to `mark` is not allowed, or null when it is. */
export function switchBlocker(spec: ChartSpec, mark: MarkKind,
                              rules: MarkRules): string | null {
  const rule: MarkRule | undefined = rules[mark];
  if (!rule) return `no rule metadata for ${mark}`;
  const n = spec.data.length;
  const xType = spec.encoding.x.type;
  const yType = spec.encoding.y.type;
  const agg = spec.encoding.y.aggregate;
  if (rule.x_types && !rule.x_types.includes(xType)) {
    return `${mark} needs a ${rule.x_types.join(" or ")} x axis`;
  }
  if (rule.y_types && !(rule.y_types.includes(yType) || agg === "COUNT")) {
    return `${mark} needs a ${rule.y_types.join(" or ")} y axis`;
  }
  if (rule.aggregates && !rule.aggregates.includes(agg)) {
    return `${mark} does not support ${agg}`;
  }
  if (rule.no_avg && agg === "AVG") {
    return `${mark} does not support AVG`;
  }
  if (rule.min_points !== undefined && n < rule.min_points) {
    return `${mark} needs at least ${rule.min_points} points`;
  }
  if (rule.max_points !== undefined && n > rule.max_points) {
    return `${mark} renders at most ${rule.max_points} points`;
  }
  if (rule.y_nonnegative && spec.data.some((r) => r.y < 0)) {
    return `${mark} cannot show negative values`;
  }
  if (rule.distinct_x && distinctX(spec) !== n) {
    return `${mark} needs one point per distinct x value`;
  }
  return null;
}

export function allowedMarks(spec: ChartSpec, rules: MarkRules): MarkKind[] {
  return ALL_MARKS.filter((m) => m !== spec.mark
    && switchBlocker(spec, m, rules) === null);
}

/** Re-encode the same data rows under another mark (pie gains shares). */
export function reencode(spec: ChartSpec, mark: MarkKind): ChartSpec {
  const data = spec.data.map((row) => ({ ...row }));
  if (mark === "pie") {
    const total = data.reduce((acc, r) => acc + r.y, 0);
    for (const row of data) {
      if (total !== 0) row.share = row.y / total;
    }
  } else {
    for (const row of data) delete row.share;
  }
  return { ...spec, mark, data, encoding: { ...spec.encoding } };
}

/** JSON shapes of the graph service, mirrored field for field. */

export interface GraphLink {
  source: string;
  target: string;
  lag: number;
  strength: number | null;
  provenance: string;
}

export interface GraphPayload {
  variables: string[];
  tau_max: number;
  alpha: number;
  links: GraphLink[];
}

export interface SummaryEdge {
  source: string;
  target: string;
  lags: number[];
  max_abs_strength: number | null;
  provenances: string[];
}

export interface SummaryPayload {
  variables: string[];
  tau_max: number;
  edges: SummaryEdge[];
}

/** One selected feature set; `columns` are (variable, lag) pairs. */
export interface FeaturePayload {
  target: string;
  method: string;
  columns: [string, number][];
  flags: string[];
  params: Record<string, unknown>;
}

export interface QuickEvalPayload {
  mae: number;
  mape: number | null;
  mae_w: number | null;
  n_features: number;
  windows: number;
}

export interface EditEntry {
  source: string;
  target: string;
  lag: number;
  note: string;
}

export interface EditRequest {
  author: string;
  add: EditEntry[];
  remove: EditEntry[];
  commit: boolean;
}

export interface EditResponse {
  committed: boolean;
  graph: GraphPayload;
  summary: SummaryPayload;
}

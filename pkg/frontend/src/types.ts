/** Payload shapes of the annotation service JSON API (api_version 1). */

export interface Progress {
  answered: number;
  estimated_remaining: number;
}

export interface Manifest {
  api_version: number;
  session_id: string;
  item_count: number;
  n_sub: number;
  phase: "initial_sort" | "merging" | "done";
  created_ts: number;
  updated_ts: number;
  image_source: string | null;
  task_token: string;
  progress: Progress;
}

export interface SortTask {
  api_version: number;
  task_token: string;
  kind: "sort";
  ids: string[];
  progress: Progress;
}

export interface CompareTask {
  api_version: number;
  task_token: string;
  kind: "compare";
  id_a: string;
  id_b: string;
  progress: Progress;
}

export type Task = SortTask | CompareTask;

export interface ResponseResult {
  api_version: number;
  phase: Manifest["phase"];
  task_token: string;
  progress: Progress;
}

export interface RankingEntry {
  id: string;
  rank: number;
}

export interface ExportPayload {
  api_version: number;
  session_id: string;
  ranking: RankingEntry[];
}

export interface ApiError {
  status: number;
  message: string;
}

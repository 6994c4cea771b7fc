/**
 * Thin HTTP client for a running valori node. The node is the only code
 * path that touches kernel state; the harness just speaks JSON to it and
 * keeps the node-reported distances as strings (they are exact decimals
 * of a wide fixed-point value — parsing them into JS floats would round).
 */

export type QueryHit = {
  id: number;
  distance_raw: string;
  distance: string;
};

export type QueryResponse = {
  state_hash: string;
  results: QueryHit[];
};

export type MutationReceipt = {
  clock: number;
  state_hash: string;
};

export class NodeError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(`${code} (${status}): ${detail}`);
  }
}

export class NodeClient {
  constructor(private readonly baseUrl: string) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await res.json()) as Record<string, unknown>;
    if (!res.ok || typeof payload.error === "string") {
      throw new NodeError(
        res.status,
        String(payload.error ?? "HttpError"),
        String(payload.detail ?? ""),
      );
    }
    return payload as T;
  }

  insert(id: number, vector: number[], metadataBase64?: string): Promise<MutationReceipt> {
    const body: Record<string, unknown> = { id, vector };
    if (metadataBase64 !== undefined) {
      body.metadata = metadataBase64;
    }
    return this.post("/v1/insert", body);
  }

  delete(id: number): Promise<MutationReceipt> {
    return this.post("/v1/delete", { id });
  }

  link(a: number, b: number): Promise<MutationReceipt> {
    return this.post("/v1/link", { a, b });
  }

  query(vector: number[], k: number, ef?: number): Promise<QueryResponse> {
    const body: Record<string, unknown> = { vector, k };
    if (ef !== undefined) {
      body.ef = ef;
    }
    return this.post("/v1/query", body);
  }

  async hash(): Promise<string> {
    const res = await fetch(`${this.baseUrl}/v1/hash`);
    const payload = (await res.json()) as { state_hash: string };
    return payload.state_hash;
  }

  async health(): Promise<{ status: string; clock: number }> {
    const res = await fetch(`${this.baseUrl}/v1/health`);
    return (await res.json()) as { status: string; clock: number };
  }

  async snapshot(): Promise<Uint8Array> {
    const res = await fetch(`${this.baseUrl}/v1/snapshot`);
    return new Uint8Array(await res.arrayBuffer());
  }
}

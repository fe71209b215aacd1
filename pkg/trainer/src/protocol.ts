/**
 * Line-protocol client for the tilebalance gateway.
 *
 * One JSON object per LF line; every request gets exactly one in-order
 * response echoing req_id. Requests may be pipelined: we keep a FIFO of
 * pending resolvers and match responses by req_id as lines arrive.
 */

import * as net from "net";

export interface StepInfo {
  b: number;
  wins1: number;
  wins2: number;
  draws: number;
  steps_used: number;
  balanced: boolean;
  draw_causes?: Record<string, number>;
}

export interface ResetData {
  obs: number[][];
  info: StepInfo;
  level_id?: string;
}

export interface StepData {
  obs: number[][];
  reward: number;
  done: boolean;
  info: StepInfo;
}

export interface HelloData {
  protocol_version: number;
  variant: string;
  action_components: number[];
  observation_shape: number[];
  pairing: string[];
}

export interface SpecData extends HelloData {
  max_steps: number;
  n_sims: number;
  epsilon: number;
  dataset_size: number;
}

interface Pending {
  reqId: number;
  resolve: (data: any) => void;
  reject: (err: Error) => void;
}

export class GatewayClient {
  private socket: net.Socket;
  private buffer = "";
  private pending: Pending[] = [];
  private nextReqId = 1;
  private closed = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (chunk) => this.onData(chunk.toString("utf-8")));
    socket.on("error", (err) => this.failAll(err));
    socket.on("close", () => this.failAll(new Error("gateway connection closed")));
  }

  static connect(host: string, port: number, timeoutMs = 10000): Promise<GatewayClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`timeout connecting to gateway at ${host}:${port}`));
      }, timeoutMs);
      socket.once("connect", () => {
        clearTimeout(timer);
        socket.setNoDelay(true);
        resolve(new GatewayClient(socket));
      });
      socket.once("error", (err) => {
        clearTimeout(timer);
        reject(new Error(`cannot reach gateway at ${host}:${port}: ${err.message}`));
      });
    });
  }

  private onData(text: string) {
    this.buffer += text;
    let idx: number;
    while ((idx = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 1);
      if (!line.trim()) continue;
      const reply = JSON.parse(line);
      const pending = this.pending.shift();
      if (!pending) continue;
      if (reply.req_id !== pending.reqId) {
        pending.reject(new Error(`out-of-order reply: got ${reply.req_id}, want ${pending.reqId}`));
        continue;
      }
      if (reply.ok) {
        pending.resolve(reply.data);
      } else {
        const err = reply.error ?? {};
        pending.reject(new Error(`gateway error ${err.code}: ${err.message}`));
      }
    }
  }

  private failAll(err: Error) {
    if (this.closed) return;
    this.closed = true;
    for (const p of this.pending.splice(0)) p.reject(err);
  }

  /** Send one request; resolves with the response data. Pipelining-safe. */
  request<T = any>(cmd: string, payload: Record<string, unknown> = {}): Promise<T> {
    if (this.closed) return Promise.reject(new Error("client closed"));
    const reqId = this.nextReqId++;
    const line = JSON.stringify({ cmd, req_id: reqId, ...payload }) + "\n";
    return new Promise<T>((resolve, reject) => {
      this.pending.push({ reqId, resolve, reject });
      this.socket.write(line);
    });
  }

  hello(): Promise<HelloData> {
    return this.request<HelloData>("hello");
  }

  spec(): Promise<SpecData> {
    return this.request<SpecData>("spec");
  }

  reset(slot: number, opts: { seed?: number; index?: number } = {}): Promise<ResetData> {
    return this.request<ResetData>("reset", { slot, ...opts });
  }

  step(slot: number, action: number[]): Promise<StepData> {
    return this.request<StepData>("step", { slot, action });
  }

  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.request("close");
    } catch {
      // best effort: server may close the socket right after replying
    }
    this.closed = true;
    this.socket.destroy();
  }

  /** For tests: resolves once nothing is in flight. */
  get inflight(): number {
    return this.pending.length;
  }
}

export function parseEndpoint(text: string): { host: string; port: number } {
  const idx = text.lastIndexOf(":");
  if (idx < 0) throw new Error(`bad gateway endpoint '${text}', expected HOST:PORT`);
  const host = text.slice(0, idx) || "127.0.0.1";
  const port = Number(text.slice(idx + 1));
  if (!Number.isInteger(port) || port <= 0) throw new Error(`bad gateway port in '${text}'`);
  return { host, port };
}

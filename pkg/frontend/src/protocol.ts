// Wire protocol shared with the server: one JSON object per WebSocket
// text frame, {"type", "session_id", "seq", "payload"}.

export const PROTOCOL_VERSION = 1;

export type MessageType =
  | 'join'
  | 'role_assign'
  | 'stroke_add'
  | 'guess'
  | 'feedback'
  | 'alert'
  | 'false_alarm'
  | 'violation_flag'
  | 'game_end'
  | 'error';

const MESSAGE_TYPES: readonly MessageType[] = [
  'join',
  'role_assign',
  'stroke_add',
  'guess',
  'feedback',
  'alert',
  'false_alarm',
  'violation_flag',
  'game_end',
  'error',
];

export interface WireMessage {
  type: MessageType;
  session_id: string | null;
  seq: number;
  payload: Record<string, unknown>;
}

export type Role = 'drawer' | 'guesser';
export type StrokeKind = 'draw' | 'erase';

export interface StrokeData {
  id: number;
  kind: StrokeKind;
  t_ms: number;
  pts: [number, number][];
}

export interface AlertBox {
  cx: number;
  cy: number;
  w: number;
  h: number;
  category: string;
  conf: number;
}

export function encodeMessage(msg: WireMessage): string {
  return JSON.stringify(msg);
}

export function parseMessage(raw: string): WireMessage {
  const obj = JSON.parse(raw);
  if (typeof obj !== 'object' || obj === null) {
    throw new Error('message must be a JSON object');
  }
  if (!MESSAGE_TYPES.includes(obj.type)) {
    throw new Error(`unknown message type ${obj.type}`);
  }
  if (!Number.isInteger(obj.seq) || obj.seq < 0) {
    throw new Error('seq must be a non-negative integer');
  }
  return {
    type: obj.type,
    session_id: obj.session_id ?? null,
    seq: obj.seq,
    payload: obj.payload ?? {},
  };
}

export function strokePayload(stroke: StrokeData): Record<string, unknown> {
  return {
    id: stroke.id,
    kind: stroke.kind,
    t_ms: stroke.t_ms,
    pts: stroke.pts.map(([x, y]) => [round2(x), round2(y)]),
  };
}

export function round2(v: number): number {
  return Math.round(v * 100) / 100;
}

import { describe, expect, it } from "vitest";

import { createSseParser } from "../src/sse.js";

describe("sse parser", () => {
  it("parses a complete unnamed event as message", () => {
    const feed = createSseParser();
    const events = feed('data: {"tick": 1}\n\n');
    expect(events).toEqual([{ event: "message", data: '{"tick": 1}' }]);
  });

  it("reads named events", () => {
    const feed = createSseParser();
    const events = feed('event: gate\ndata: {"decision_id": "d1"}\n\n');
    expect(events).toEqual([{ event: "gate", data: '{"decision_id": "d1"}' }]);
  });

  it("buffers events split across chunks", () => {
    const feed = createSseParser();
    expect(feed("data: {\"ti")).toEqual([]);
    expect(feed('ck": 2}\n')).toEqual([]);
    const events = feed("\n");
    expect(events).toEqual([{ event: "message", data: '{"tick": 2}' }]);
  });

  it("drops keep-alive comments", () => {
    const feed = createSseParser();
    expect(feed(": keep-alive\n\n")).toEqual([]);
    expect(feed(': ping\ndata: {"x":1}\n\n')).toEqual([{ event: "message", data: '{"x":1}' }]);
  });

  it("handles several events in one chunk and crlf", () => {
    const feed = createSseParser();
    const events = feed("data: a\r\n\r\ndata: b\n\n");
    expect(events.map((e) => e.data)).toEqual(["a", "b"]);
  });

  it("joins multi-line data", () => {
    const feed = createSseParser();
    const events = feed("data: line1\ndata: line2\n\n");
    expect(events[0]!.data).toBe("line1\nline2");
  });
});

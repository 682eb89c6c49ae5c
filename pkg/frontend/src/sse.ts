/** Incremental server-sent-event parsing, kept pure so the resubscribe
 * logic can be tested without a browser EventSource. */

export interface SseMessage {
  event: string; // "message" when the stream did not name the event
  data: string;
}

/** Returns a feed function: push raw chunks in, get completed events out.
 * Handles events split across chunk boundaries and comment keep-alives. */
export function createSseParser(): (chunk: string) => SseMessage[] {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk.replace(/\r\n/g, "\n");
    const out: SseMessage[] = [];
    let index;
    while ((index = buffer.indexOf("\n\n")) >= 0) {
      const block = buffer.slice(0, index);
      buffer = buffer.slice(index + 2);
      let event = "message";
      const data: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith(":")) continue; // keep-alive comment
        if (line.startsWith("event:")) event = line.slice(6).trim();
        else if (line.startsWith("data:")) data.push(line.slice(5).trimStart());
      }
      if (data.length > 0) out.push({ event, data: data.join("\n") });
    }
    return out;
  };
}

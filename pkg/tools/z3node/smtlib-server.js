#!/usr/bin/env node
// SMT-LIB 2 command server backed by the z3-solver WASM build.
//
// Reads SMT-LIB commands from stdin (possibly several per line, possibly
// spanning lines), evaluates each complete parenthesized command against a
// persistent Z3 context, and writes the solver's response to stdout.  This
// makes the WASM build usable as a drop-in child-process solver wherever a
// native `z3 -in` would be used.
'use strict';

const { init } = require('z3-solver');

function splitCommands(buffer) {
  // Returns [commands, remainder]; a command is one balanced s-expression.
  const commands = [];
  let depth = 0;
  let start = -1;
  let inString = false;
  let inComment = false;
  for (let i = 0; i < buffer.length; i++) {
    const ch = buffer[i];
    if (inComment) {
      if (ch === '\n') inComment = false;
      continue;
    }
    if (inString) {
      if (ch === '"') inString = false;
      continue;
    }
    if (ch === '"') {
      inString = true;
      continue;
    }
    if (ch === ';' && depth === 0) {
      inComment = true;
      continue;
    }
    if (ch === '(') {
      if (depth === 0) start = i;
      depth++;
    } else if (ch === ')') {
      depth--;
      if (depth === 0 && start >= 0) {
        commands.push(buffer.slice(start, i + 1));
        start = -1;
      }
    }
  }
  const remainder = depth > 0 && start >= 0 ? buffer.slice(start) : '';
  return [commands, remainder];
}

async function main() {
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  Z3.del_config(cfg);

  let pending = '';
  let queue = Promise.resolve();
  process.stdin.setEncoding('utf8');
  process.stdout.write('ready\n');

  process.stdin.on('data', (chunk) => {
    pending += chunk;
    const [commands, remainder] = splitCommands(pending);
    pending = remainder;
    for (const cmd of commands) {
      queue = queue.then(async () => {
        if (cmd === '(exit)') {
          process.exit(0);
        }
        let out;
        try {
          out = await Z3.eval_smtlib2_string(ctx, cmd);
        } catch (err) {
          out = `(error "${String(err).replace(/"/g, "'")}")\n`;
        }
        if (out && out.length > 0) {
          process.stdout.write(out.endsWith('\n') ? out : out + '\n');
        } else if (/^\(\s*(check-sat|get-value|get-model|get-info)/.test(cmd)) {
          // These commands always produce output; empty means the parser
          // swallowed it, which we surface as a protocol error.
          process.stdout.write('(error "no output")\n');
        }
      });
    }
  });

  process.stdin.on('end', () => {
    queue.then(() => process.exit(0));
  });
}

main().catch((err) => {
  process.stderr.write(String(err) + '\n');
  process.exit(1);
});

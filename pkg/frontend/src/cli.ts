import { writeFileSync } from 'fs';
import { FigureOptions, RENDERERS } from './figures.js';

function usage(): never {
  const kinds = Object.keys(RENDERERS).join(' | ');
  console.error(
    `usage: render --kind <${kinds}> --input a.csv [--input b.csv ...] ` +
    `--output fig.svg [--onset <time>] [--label <name> ...] [--title <text>]`,
  );
  process.exit(2);
}

export function parseArgs(argv: string[]): { kind: string; options: FigureOptions } {
  let kind = '';
  const inputs: string[] = [];
  const labels: string[] = [];
  let output = '';
  let onsetTime: number | undefined;
  let title: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) usage();
      return argv[i];
    };
    if (a === '--kind') kind = next();
    else if (a === '--input') inputs.push(next());
    else if (a === '--label') labels.push(next());
    else if (a === '--output') output = next();
    else if (a === '--onset') onsetTime = Number(next());
    else if (a === '--title') title = next();
    else usage();
  }
  if (!kind || !output || inputs.length === 0) usage();
  if (!(kind in RENDERERS)) {
    console.error(`unknown figure kind '${kind}'`);
    process.exit(2);
  }
  return { kind, options: { inputs, output, onsetTime, labels, title } };
}

export function main(argv: string[]): number {
  const { kind, options } = parseArgs(argv);
  const svg = RENDERERS[kind](options);
  writeFileSync(options.output, svg);
  console.log(`wrote ${options.output}`);
  return 0;
}

const invokedDirectly = process.argv[1] && process.argv[1].endsWith('cli.js');
if (invokedDirectly) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    process.exit(1);
  }
}

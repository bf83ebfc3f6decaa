#!/usr/bin/env node
/** CLI: `export --model <id> --data <dir> --size <px> --out <file>` and
 * `verify <file>`. Malformed archives exit non-zero with the byte offset. */

import * as fs from 'fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { exportFeatures } from './export';
import { FarcFormatError, decodeFarc, summarize } from './farc';

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command('export', 'export dataset features into a FARC archive', (y) => y
      .option('model', { type: 'string', demandOption: true,
                         describe: 'zoo name or checkpoint path' })
      .option('data', { type: 'string', demandOption: true,
                        describe: 'dataset directory with class subfolders' })
      .option('size', { type: 'number', default: 32,
                        describe: 'resize target in pixels' })
      .option('out', { type: 'string', demandOption: true }))
    .command('verify <file>', 'validate an archive and print a summary')
    .demandCommand(1)
    .strict()
    .parse();

  const command = argv._[0];
  if (command === 'export') {
    const n = await exportFeatures({
      model: argv.model as string,
      dataDir: argv.data as string,
      size: argv.size as number,
      outPath: argv.out as string,
    });
    console.log(JSON.stringify({ written: argv.out, records: n }));
    return 0;
  }
  // verify
  const records = decodeFarc(fs.readFileSync(argv.file as string));
  console.log(JSON.stringify(summarize(records), null, 2));
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    if (err instanceof FarcFormatError) {
      console.error(`invalid archive: ${err.message}`);
    } else {
      console.error(`error: ${(err as Error).message}`);
    }
    process.exit(1);
  },
);

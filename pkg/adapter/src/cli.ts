import { parseArgs } from 'node:util'

import {
  ALL_ARTIFACT_KINDS,
  extractArtifacts,
  generateCorpus,
  manifestPath,
  readJob,
  scorePreferences,
} from './generate.js'

const USAGE = `usage:
  adapter generate --job job.json
  adapter extract  --manifest manifest.json [--kinds a,b,c]
  adapter score    --manifest manifest.json
  adapter all      --job job.json

Artifact kinds: ${ALL_ARTIFACT_KINDS.join(', ')}`

function fail(message: string): never {
  console.error(message)
  process.exit(1)
}

const [command, ...rest] = process.argv.slice(2)
const args = parseArgs({
  args: rest,
  options: {
    job: { type: 'string', short: 'j' },
    manifest: { type: 'string', short: 'm' },
    kinds: { type: 'string', short: 'k' },
  },
})

function reportFailures(failures: { seed: number; prompt_id: string; stage: string; error: string }[]) {
  for (const f of failures) {
    console.error(`FAIL [${f.stage}] seed ${f.seed} prompt ${f.prompt_id}: ${f.error}`)
  }
}

function summarize(scores: number[]) {
  const mean = scores.reduce((a, b) => a + b, 0) / scores.length
  const min = Math.min(...scores)
  const max = Math.max(...scores)
  console.log(`scored ${scores.length} images: mean ${mean.toFixed(4)}, range [${min.toFixed(4)}, ${max.toFixed(4)}]`)
}

switch (command) {
  case 'generate': {
    if (!args.values.job) fail(USAGE)
    const job = readJob(args.values.job)
    const { manifest, failures } = generateCorpus(job)
    reportFailures(failures)
    console.log(`wrote ${manifest.images.length} images and ${manifestPath(job)}`)
    if (failures.length > 0) process.exit(2)
    break
  }
  case 'extract': {
    if (!args.values.manifest) fail(USAGE)
    const kinds = args.values.kinds ? args.values.kinds.split(',') : [...ALL_ARTIFACT_KINDS]
    const failures = extractArtifacts(args.values.manifest, kinds)
    reportFailures(failures)
    console.log(`extracted ${kinds.join(', ')} into ${args.values.manifest}`)
    if (failures.length > 0) process.exit(2)
    break
  }
  case 'score': {
    if (!args.values.manifest) fail(USAGE)
    const { scores, failures } = scorePreferences(args.values.manifest)
    reportFailures(failures)
    summarize(scores)
    if (failures.length > 0) process.exit(2)
    break
  }
  case 'all': {
    if (!args.values.job) fail(USAGE)
    const job = readJob(args.values.job)
    const { manifest, failures } = generateCorpus(job)
    const extractFailures = extractArtifacts(manifestPath(job), [...ALL_ARTIFACT_KINDS])
    const { scores, failures: scoreFailures } = scorePreferences(manifestPath(job))
    const all = [...failures, ...extractFailures, ...scoreFailures]
    reportFailures(all)
    console.log(`corpus ready: ${manifest.images.length} images at ${manifestPath(job)}`)
    summarize(scores)
    if (all.length > 0) process.exit(2)
    break
  }
  default:
    fail(USAGE)
}
